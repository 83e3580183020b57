"""Command-line interface.

Subcommands:
  audit           play one game and print v, r, estimation, bound
  efficacy        exact oracle levels for an enumerable instance
  dpsgd           DP-SGD sweeps (manifests fig1, fig2)
  aora            adaptive-auditing comparisons (manifests fig3, cis)
  accountant      noise-scale calibration, printed as a decimal string
  validity-check  Monte Carlo validity suites

``audit`` also accepts ``--manifest`` for plain game sweeps (e.g. laplace).
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import audit as audit_mod
from . import dpsgd, efficacy, experiments, guessers, mechanisms
from .mechanisms import ConfigError, MechanismSpec, default_pairs


def _mech_from_args(args) -> MechanismSpec:
    # Merge --eps/--p/--s flags into the spec text before validation, so
    # both "--mech 'lrr eps=1'" and "--mech lrr --eps 1" work.
    tokens = args.mech.split()
    if not tokens:
        raise ConfigError("empty mechanism spec")
    params = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ConfigError(f"bad mechanism param {tok!r}, expected key=value")
        key, value = tok.split("=", 1)
        params[key] = float(value)
    for name in ("eps", "p", "s"):
        value = getattr(args, name, None)
        if value is not None:
            params[name] = math.inf if value == "inf" else float(value)
    return MechanismSpec.make(tokens[0], **params)


def _fmt_level(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return f"{x:.10g}"


def _cmd_audit(args) -> int:
    seed = 0 if args.seed is None else args.seed
    beta = 0.05 if args.beta is None else args.beta
    if args.manifest:
        n = experiments.run_manifest(
            args.manifest, args.out or f"{args.manifest}.{args.format}",
            fmt=args.format, reps=args.reps, seed=args.seed, beta=args.beta,
        )
        print(f"wrote {n} rows")
        return 0
    mech = _mech_from_args(args)
    z = default_pairs(mech, args.n)
    gspec = guessers.GuesserSpec.parse(args.guesser)
    rng = np.random.default_rng(seed)
    if gspec.kind in ("adaptive_ml", "xip_adaptive"):
        adaptive = guessers.build_adaptive_guesser(gspec, mech, z)
        counts = audit_mod.run_adaptive(mech, z, adaptive, rng)
    else:
        static = guessers.build_static_guesser(gspec, mech, z)
        counts = audit_mod.run_one_run(mech, z, static, rng)
    estimation, bound = audit_mod.audit_report(counts, beta)
    print(f"v={counts.v}")
    print(f"r={counts.r}")
    print(f"estimation={_fmt_level(estimation)}")
    print(f"bound={_fmt_level(bound)}")
    return 0


def _cmd_efficacy(args) -> int:
    mech = _mech_from_args(args)
    z = default_pairs(mech, args.n)
    model = mechanisms.model(mech, args.n)
    k = args.k if args.k is not None else args.n
    levels = efficacy.relaxation_levels(model, z, k=k)
    print(f"efficacy={_fmt_level(efficacy.optimal_efficacy(model, z, k))}")
    print(f"efficacy_all={_fmt_level(levels.ae_ac_ddp)}")
    print(f"tv={_fmt_level(efficacy.tv_efficacy(model, z))}")
    print(f"k={levels.k}")
    print(f"k_ae_ac_ddp={_fmt_level(levels.k_ae_ac_ddp)}")
    print(f"ae_ac_ddp={_fmt_level(levels.ae_ac_ddp)}")
    print(f"ac_ddp={_fmt_level(levels.ac_ddp)}")
    print(f"ddp={_fmt_level(levels.ddp)}")
    print(f"dp_level={_fmt_level(levels.dp_level)}")
    return 0


def _cmd_manifest(args, allowed: tuple[str, ...]) -> int:
    name = args.manifest
    out = args.out or f"{name}.{args.format}"
    n = experiments.run_manifest(
        name, out, fmt=args.format, reps=args.reps, seed=args.seed, beta=args.beta
    )
    print(f"wrote {n} rows to {out}")
    return 0


def _cmd_accountant(args) -> int:
    sigma = dpsgd.rdp_noise_scale(args.eps, args.delta, args.steps, args.q)
    print(f"{sigma:.6f}")
    return 0


def _cmd_validity(args) -> int:
    trials = args.trials
    beta = 0.05 if args.beta is None else args.beta
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    slack = 3.0 * math.sqrt(beta * (1.0 - beta) / trials)

    if args.suite == "ora":
        mech = MechanismSpec.make("lrr", eps=1.0)
        z = default_pairs(mech, 200)
        guesser = guessers.identity_guesser(z)
        hits = sum(
            audit_mod.audit_report(audit_mod.run_one_run(mech, z, guesser, rng), beta)[1] > 1.0
            for _ in range(trials)
        )
        frac, limit = hits / trials, beta + slack
        ok = frac <= limit
        print(f"suite=ora violations={frac:.4f} limit={limit:.4f} {'PASS' if ok else 'FAIL'}")
        return 0 if ok else 1

    if args.suite == "aora":
        mech = MechanismSpec.make("lrr", eps=1.0)
        z = default_pairs(mech, 200)
        import oralab.loss as loss_mod

        source = loss_mod.rr_loss_source(1.0, z)
        hits = 0
        for _ in range(trials):
            guesser = guessers.AdaptiveMlGuesser(source, tau=0.0)
            counts = audit_mod.run_adaptive(mech, z, guesser, rng)
            hits += audit_mod.audit_report(counts, beta)[1] > 1.0
        frac, limit = hits / trials, beta + slack
        ok = frac <= limit
        print(f"suite=aora violations={frac:.4f} limit={limit:.4f} {'PASS' if ok else 'FAIL'}")
        return 0 if ok else 1

    if args.suite == "full-knowledge":
        eps = 0.5
        mech = MechanismSpec.make("xrr", eps=eps)
        z = default_pairs(mech, 30)
        guesser = guessers.xor_parity_fk_guesser(z)
        hits = sum(
            audit_mod.audit_report(audit_mod.run_full_knowledge(mech, z, guesser, rng), beta)[1]
            > eps
            for _ in range(trials)
        )
        frac = hits / trials
        ok = frac >= 0.55
        print(
            f"suite=full-knowledge violations={frac:.4f} expected>=0.55 "
            f"{'INVALIDITY DEMONSTRATED' if ok else 'FAIL'}"
        )
        return 0 if ok else 1

    raise ConfigError(f"unknown suite {args.suite!r}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    # None means "not supplied": single-game commands fall back to seed 0 and
    # beta 0.05, manifest runs fall back to the manifest's own values.
    parser.add_argument("--seed", type=int, default=None, help="base random seed")
    parser.add_argument("--beta", type=float, default=None, help="confidence failure budget")
    parser.add_argument("--out", default=None, help="output file path")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oralab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("audit", help="play one audit game")
    p.add_argument("--mech", default="lrr eps=1", help="mechanism spec, e.g. 'lrr eps=1'")
    p.add_argument("--eps", default=None, help="mechanism eps (overrides --mech)")
    p.add_argument("--p", default=None, help="mechanism p (overrides --mech)")
    p.add_argument("--s", default=None, help="mechanism s (overrides --mech)")
    p.add_argument("--n", type=int, default=100, help="number of elements")
    p.add_argument("--guesser", default="identity", help="guesser spec, e.g. 'ml_topk k=4'")
    p.add_argument("--manifest", default=None, help="run a game-sweep manifest instead")
    p.add_argument("--reps", type=int, default=None, help="override manifest reps")
    _add_common(p)
    p.set_defaults(fn=_cmd_audit)

    p = sub.add_parser("efficacy", help="exact efficacy oracle levels")
    p.add_argument("--mech", required=True)
    p.add_argument("--eps", default=None)
    p.add_argument("--p", default=None)
    p.add_argument("--s", default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=None, help="guess budget (default: n)")
    _add_common(p)
    p.set_defaults(fn=_cmd_efficacy)

    p = sub.add_parser("dpsgd", help="DP-SGD sweeps (fig1, fig2)")
    p.add_argument("--manifest", default="fig1", help="manifest name or path")
    p.add_argument("--reps", type=int, default=None, help="override manifest reps")
    _add_common(p)
    p.set_defaults(fn=lambda a: _cmd_manifest(a, ("fig1", "fig2")))

    p = sub.add_parser("aora", help="adaptive auditing comparisons (fig3, cis)")
    p.add_argument("--manifest", default="fig3", help="manifest name or path")
    p.add_argument("--reps", type=int, default=None, help="override manifest reps")
    _add_common(p)
    p.set_defaults(fn=lambda a: _cmd_manifest(a, ("fig3", "cis")))

    p = sub.add_parser("accountant", help="calibrate the noise scale")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--t", "--steps", dest="steps", type=int, required=True)
    p.add_argument("--q", type=float, required=True)
    p.set_defaults(fn=_cmd_accountant)

    p = sub.add_parser("validity-check", help="Monte Carlo validity suites")
    p.add_argument("--suite", choices=("ora", "aora", "full-knowledge"), required=True)
    p.add_argument("--trials", type=int, default=2000)
    _add_common(p)
    p.set_defaults(fn=_cmd_validity)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, audit_mod.AllAbstainError, dpsgd.CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
