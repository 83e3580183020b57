"""Experiment orchestration: seeded sweeps, CSV/JSON emission, and the
named replication manifests.

Per-replicate randomness is derived as ``SeedSequence([seed, h])`` where
``h`` is the first 8 bytes of SHA-256 over
``"{experiment_id}|{sweep_name}={value}|rep={rep}"`` -- a documented, stable
hash, so sweeps are reproducible and replicates uncorrelated.

CSV is the canonical artifact: columns exactly in ``CSV_COLUMNS`` order, one
row per replicate plus ``mean`` and ``sem`` summary rows per sweep value,
floats rendered via ``repr`` so identical configs produce identical bytes.
JSON mirrors the same records, with non-finite numbers rendered as strings.

A replicate whose guesser abstains everywhere (possible by design for
certainty-threshold guessers) is recorded as a zero-information row with
v = r = 0 and zero estimation and bound, rather than aborting the sweep.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from collections.abc import Callable, Iterable, Sequence
from importlib import resources
from pathlib import Path

import numpy as np

from . import audit, dpsgd, efficacy, guessers
from .mechanisms import ConfigError, MechanismSpec, PairVector, default_pairs
from .stats import AuditCounts, mean_sem

CSV_COLUMNS = (
    "experiment_id",
    "sweep_name",
    "sweep_value",
    "rep",
    "seed",
    "v",
    "r",
    "estimation",
    "bound",
    "accuracy",
)

KINDS = ("toy", "dpsgd", "dpsgd_single", "cis")


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    kind: str
    sweep_name: str
    sweep_values: tuple[float, ...]
    reps: int
    beta: float
    seed: int
    params: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must be in (0, 1), got {self.beta}")
        if not self.sweep_values:
            raise ConfigError("sweep_values must be nonempty")

    def param(self, name: str, default: str | None = None) -> str:
        for k, v in self.params:
            if k == name:
                return v
        if default is None:
            raise ConfigError(f"experiment {self.experiment_id!r} needs param {name!r}")
        return default


@dataclasses.dataclass(frozen=True)
class ResultRow:
    experiment_id: str
    sweep_name: str
    sweep_value: float
    rep: int | str
    seed: int | None
    v: float
    r: float
    estimation: float
    bound: float
    accuracy: float | None

    def as_record(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    f = float(value)
    if math.isfinite(f) and abs(f) < 1e15 and f == int(f):
        return str(int(f))
    return repr(f)


def replicate_rng(
    seed: int, experiment_id: str, sweep_name: str, value, rep: int
) -> np.random.Generator:
    key = f"{experiment_id}|{sweep_name}={_fmt(value)}|rep={rep}"
    digest = hashlib.sha256(key.encode()).digest()
    h = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([seed, h]))


# --- runners -------------------------------------------------------------------


def _substitute(spec_text: str, name: str, value: float) -> str:
    spec = MechanismSpec.parse(spec_text)
    if any(k == name for k, _ in spec.params):
        kept = {k: v for k, v in spec.params if k != name}
        kept[name] = value
        return MechanismSpec.make(spec.kind, **kept).to_text()
    return spec_text


def _make_toy_runner(cfg: ExperimentConfig, value) -> Callable[[np.random.Generator], AuditCounts]:
    mech_text = cfg.param("mech")
    guesser_text = cfg.param("guesser")
    n = int(float(cfg.param("n")))
    if cfg.sweep_name == "n":
        n = int(value)
        if n < 1:
            raise ConfigError(f"n must be >= 1, got {n}")
    else:
        mech_text = _substitute(mech_text, cfg.sweep_name, value)
        gspec = guessers.GuesserSpec.parse(guesser_text)
        if any(k == cfg.sweep_name for k, _ in gspec.params):
            kept = {k: v for k, v in gspec.params if k != cfg.sweep_name}
            kept[cfg.sweep_name] = value
            guesser_text = guessers.GuesserSpec.make(gspec.kind, **kept).to_text()
    mech = MechanismSpec.parse(mech_text)
    z = default_pairs(mech, n)
    gspec = guessers.GuesserSpec.parse(guesser_text)
    if gspec.kind in ("adaptive_ml", "xip_adaptive"):
        adaptive = guessers.build_adaptive_guesser(gspec, mech, z)
        return lambda rng: audit.run_adaptive(mech, z, adaptive, rng)
    static = guessers.build_static_guesser(gspec, mech, z)
    return lambda rng: audit.run_one_run(mech, z, static, rng)


def _make_dpsgd_runner(cfg: ExperimentConfig, value) -> Callable[[np.random.Generator], AuditCounts]:
    d = int(cfg.param("d", "1000"))
    steps = int(cfg.param("steps", "100"))
    rate = float(cfg.param("sample_rate", "0.1"))
    eps = float(cfg.param("eps", "2"))
    delta = float(cfg.param("delta", "1e-5"))
    if cfg.sweep_name == "k":
        n = int(float(cfg.param("n")))
        k = int(value)
    elif cfg.sweep_name == "nd":
        n = int(value) * d
        k = int(float(cfg.param("k")))
    else:
        raise ConfigError(f"dpsgd sweeps over 'k' or 'nd', not {cfg.sweep_name!r}")
    score_step = cfg.param("score_step", "all")
    step = None if score_step == "all" else int(score_step)
    sigma = dpsgd.rdp_noise_scale(eps, delta, steps, rate)
    config = dpsgd.DpSgdConfig(n=n, sigma=sigma, d=d, steps=steps, sample_rate=rate)
    assignment = dpsgd.assign_canaries(n, d)
    mechanism = dpsgd.simulator(config, assignment)
    z = PairVector.binary(n)
    guesser = guessers.sort_guesser(
        lambda sums: dpsgd.element_scores(sums, assignment, step), k
    )
    return lambda rng: audit.run_one_run(mechanism, z, guesser, rng)


def _make_dpsgd_single_runner(
    cfg: ExperimentConfig, value
) -> Callable[[np.random.Generator], AuditCounts]:
    d = int(cfg.param("d", "1000"))
    eps = float(cfg.param("eps", "2"))
    delta = float(cfg.param("delta", "1e-5"))
    tau = float(cfg.param("tau", "1"))
    adaptive = cfg.param("method") == "aora"
    if cfg.sweep_name != "nd":
        raise ConfigError(f"dpsgd_single sweeps over 'nd', not {cfg.sweep_name!r}")
    n = int(value) * d
    sigma = dpsgd.rdp_noise_scale(eps, delta, 1, 1.0)
    config = dpsgd.DpSgdConfig(n=n, sigma=sigma, d=d, steps=1, sample_rate=1.0)
    return lambda rng: dpsgd.single_step_audit(config, tau, rng, adaptive)


def _make_cis_runner(cfg: ExperimentConfig, value) -> Callable[[np.random.Generator], AuditCounts]:
    num_sets = int(cfg.param("num_sets", "100"))
    adaptive = cfg.param("method") == "aora"
    s = int(value)
    return lambda rng: efficacy.simulate_cis_guess_counts(s, num_sets, adaptive, rng).counts


_RUNNERS = {
    "toy": _make_toy_runner,
    "dpsgd": _make_dpsgd_runner,
    "dpsgd_single": _make_dpsgd_single_runner,
    "cis": _make_cis_runner,
}


# --- sweep execution -------------------------------------------------------------


def _zero_row(cfg: ExperimentConfig, value, rep: int, seed: int) -> ResultRow:
    return ResultRow(cfg.experiment_id, cfg.sweep_name, value, rep, seed,
                     v=0, r=0, estimation=0.0, bound=0.0, accuracy=None)


def _summaries(cfg: ExperimentConfig, value, rows: Sequence[ResultRow]) -> list[ResultRow]:
    out = []
    for stat_idx, label in ((0, "mean"), (1, "sem")):
        fields = {}
        for col in ("v", "r", "estimation", "bound"):
            fields[col] = mean_sem([getattr(r, col) for r in rows])[stat_idx]
        accs = [r.accuracy for r in rows if r.accuracy is not None]
        fields["accuracy"] = mean_sem(accs)[stat_idx] if accs else None
        out.append(
            ResultRow(cfg.experiment_id, cfg.sweep_name, value, label, None, **fields)
        )
    return out


def run_sweep(config: ExperimentConfig) -> Iterable[ResultRow]:
    """Run every (sweep value, replicate) pair and yield rows incrementally.

    Rows appear in canonical order: sweep values as configured, replicates
    ascending, then the mean and sem summary rows for that value.
    """
    make_runner = _RUNNERS[config.kind]
    for value in config.sweep_values:
        try:
            runner = make_runner(config, value)
        except ConfigError as exc:
            raise ConfigError(
                f"{config.experiment_id}: sweep value {value!r}: {exc}"
            ) from exc
        value_rows = []
        for rep in range(config.reps):
            rng = replicate_rng(config.seed, config.experiment_id, config.sweep_name, value, rep)
            seed_repr = config.seed
            try:
                counts = runner(rng)
            except audit.AllAbstainError:
                row = _zero_row(config, value, rep, seed_repr)
            except ConfigError as exc:
                raise ConfigError(
                    f"{config.experiment_id}: sweep value {value!r}: {exc}"
                ) from exc
            else:
                estimation, bound = audit.audit_report(counts, config.beta)
                row = ResultRow(
                    config.experiment_id,
                    config.sweep_name,
                    value,
                    rep,
                    seed_repr,
                    v=counts.v,
                    r=counts.r,
                    estimation=estimation,
                    bound=bound,
                    accuracy=counts.accuracy,
                )
            value_rows.append(row)
            yield row
        yield from _summaries(config, value, value_rows)


def write_rows(rows: Iterable[ResultRow], path: Path | str, fmt: str = "csv") -> None:
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow([_fmt(v) for v in row.as_record().values()])
    elif fmt == "json":
        records = []
        for row in rows:
            rec = {}
            for key, value in row.as_record().items():
                if isinstance(value, float) and not math.isfinite(value):
                    value = _fmt(value)
                rec[key] = value
            records.append(rec)
        with path.open("w") as fh:
            json.dump(records, fh, indent=2)
            fh.write("\n")
    else:
        raise ConfigError(f"unknown format {fmt!r}")


# --- manifests --------------------------------------------------------------------

MANIFEST_NAMES = ("fig1", "fig2", "fig3", "cis", "laplace")


def _parse_manifest_text(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"manifest line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def load_manifest(name_or_path: str, **overrides) -> list[ExperimentConfig]:
    """Load a named built-in manifest (fig1, fig2, fig3, cis, laplace) or a
    manifest file path; ``reps``/``seed``/``beta`` may be overridden."""
    path = Path(name_or_path)
    if path.suffix == ".cfg" and path.exists():
        text = path.read_text()
    else:
        ref = resources.files(__package__).joinpath(f"manifests/{name_or_path}.cfg")
        if not ref.is_file():
            raise ConfigError(f"unknown manifest {name_or_path!r}")
        text = ref.read_text()
    entries = _parse_manifest_text(text)

    base_id = entries.pop("id")
    kind = entries.pop("kind")
    sweep = entries.pop("sweep")
    values = tuple(float(v) for v in entries.pop("values").split())

    def take(key: str, default: str) -> str:
        stated = entries.pop(key, default)
        supplied = overrides.get(key)
        return stated if supplied is None else str(supplied)

    reps = int(take("reps", "1"))
    beta = float(take("beta", "0.05"))
    seed = int(take("seed", "0"))
    methods = entries.pop("methods", "").split()

    def build(exp_id: str, extra: dict[str, str]) -> ExperimentConfig:
        params = tuple(sorted({**entries, **extra}.items()))
        return ExperimentConfig(
            experiment_id=exp_id,
            kind=kind,
            sweep_name=sweep,
            sweep_values=values,
            reps=reps,
            beta=beta,
            seed=seed,
            params=params,
        )

    if methods:
        return [build(f"{base_id}-{m}", {"method": m}) for m in methods]
    return [build(base_id, {})]


def run_manifest(name_or_path: str, out: Path | str, fmt: str = "csv", **overrides) -> int:
    """Run all experiments of a manifest into one output file; returns the
    number of data rows written."""
    configs = load_manifest(name_or_path, **overrides)
    rows: list[ResultRow] = []
    for cfg in configs:
        rows.extend(run_sweep(cfg))
    write_rows(rows, out, fmt)
    return len(rows)
