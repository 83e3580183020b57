"""Exact efficacy oracles and the privacy-relaxation ladder.

The optimal efficacy of a one-run audit with a guess budget of ``k`` equals
the expectation, over the output marginal, of the mean of the ``k`` largest
per-index success probabilities ``logistic(|loss_i(o)|)``. These oracles
enumerate that expectation exactly on small instances and evaluate the
closed forms for the named mechanisms; the Monte Carlo estimator closes the
loop against the game engines.
"""

from __future__ import annotations

import dataclasses
import itertools
import math

import numpy as np
from scipy.special import expit

from . import audit, guessers
from .loss import LossTable, build_loss_table, cis_loss_source
from .mechanisms import ConfigError, MechanismModel, MechanismSpec, PairVector
from .stats import AuditCounts, ExtendedReal, logistic, mean_sem


@dataclasses.dataclass(frozen=True)
class RelaxationLevels:
    """The relaxation ladder for one instance, all on the probability scale
    except ``ddp`` and ``dp_level`` which live on the epsilon scale.

    Satisfies k_ae_ac_ddp <= ac_ddp <= logistic(ddp) <= logistic(dp_level).
    """

    ddp: ExtendedReal
    dp_level: ExtendedReal
    ac_ddp: float
    ae_ac_ddp: float
    k: int
    k_ae_ac_ddp: float


def _success_rows(table: LossTable) -> np.ndarray:
    return expit(np.abs(table.losses))


def optimal_efficacy(model: MechanismModel, z: PairVector, k: int | str = "all") -> float:
    """Best achievable expected accuracy with a budget of ``k`` guesses.

    ``k="all"`` (or ``k = n``) is the no-abstention optimum; smaller ``k``
    averages only the ``k`` most confident indices per output, ranked with
    the same tie rule the game guessers use.
    """
    table = build_loss_table(model, z)
    p_rows = _success_rows(table)
    if k == "all":
        k = table.n
    if not 1 <= int(k) <= table.n:
        raise ConfigError(f"need 1 <= k <= {table.n}, got {k}")
    k = int(k)
    total = 0.0
    for weight, losses, p_row in zip(table.marginals, table.losses, p_rows):
        idx = guessers.topk_indices(np.abs(losses), k)
        total += weight * float(p_row[idx].mean())
    return total


def tv_efficacy(model: MechanismModel, z: PairVector) -> float:
    """No-abstention optimal efficacy via total variation:
    1/2 + mean over indices of TV(output | S_i=-1 vs S_i=+1) / 2."""
    table = build_loss_table(model, z)
    tv_per_index = 0.5 * np.abs(table.cond_minus - table.cond_plus).sum(axis=0)
    return 0.5 + 0.5 * float(tv_per_index.mean())


def dp_level(model: MechanismModel, z: PairVector) -> ExtendedReal:
    """Privacy level of the bit-indexed restriction of the mechanism.

    The max log-ratio of output probabilities over secret vectors differing
    in one bit. This is the level of the restricted game, a lower bound on
    the mechanism's own level.
    """
    n = z.n
    worst = 0.0
    rows: dict[tuple, np.ndarray] = {}
    for bits in itertools.product((-1, 1), repeat=n):
        rows[bits] = model.prob_row(z.dataset(bits))
    for bits, row in rows.items():
        for i in range(n):
            flipped = bits[:i] + (-bits[i],) + bits[i + 1 :]
            other = rows[flipped]
            support = row > 0.0
            if (other[support] == 0.0).any():
                return math.inf
            ratio = np.max(np.log(row[support]) - np.log(other[support]))
            worst = max(worst, float(ratio))
    return worst


def relaxation_levels(model: MechanismModel, z: PairVector, k: int = 1) -> RelaxationLevels:
    """Evaluate the whole relaxation ladder on one enumerable instance."""
    table = build_loss_table(model, z)
    p_rows = _success_rows(table)
    abs_losses = np.abs(table.losses)
    ddp = float(abs_losses.max())
    ac = float(np.dot(table.marginals, p_rows.max(axis=1)))
    ae = float(np.dot(table.marginals, p_rows.mean(axis=1)))
    return RelaxationLevels(
        ddp=ddp,
        dp_level=dp_level(model, z),
        ac_ddp=ac,
        ae_ac_ddp=ae,
        k=int(k),
        k_ae_ac_ddp=optimal_efficacy(model, z, k),
    )


def closed_form_efficacy(kind: str, **params: float) -> float:
    """The closed-form optimal efficacies of the named mechanisms.

    aon(p): 1/2 + p/2. xor: 1/2. nas(n): 1/2 + 1/(2n), approaching 1/2.
    count(n): 1/2 + E|O - n/2| / n with O ~ Binomial(n, 1/2), approaching 1/2.
    laplace(eps): 1 - exp(-eps/2) / 2. lrr(eps): logistic(eps).
    """
    if kind == "aon":
        return 0.5 + params["p"] / 2.0
    if kind == "xor":
        return 0.5
    if kind == "nas":
        return 0.5 + 1.0 / (2.0 * params["n"])
    if kind == "count":
        n = int(params["n"])
        mad = sum(math.comb(n, o) * abs(o - n / 2.0) for o in range(n + 1)) / 2.0 ** n
        return 0.5 + mad / n
    if kind == "laplace":
        return 1.0 - math.exp(-params["eps"] / 2.0) / 2.0
    if kind in ("lrr", "rr"):
        return logistic(params["eps"])
    raise ConfigError(f"no closed-form efficacy for {kind!r}")


def cis_expected_guesses(s: int, adaptive: bool) -> float:
    """Expected certainty-threshold guesses per set of size ``s``.

    Adaptive guessing earns 2 - 2^-(s-1) guesses per set; non-adaptive
    guessing is limited to the all-equal event at rate 2^-(s-1).
    """
    if s < 1:
        raise ConfigError(f"need s >= 1, got {s}")
    if adaptive:
        return 2.0 - 2.0 ** (-(s - 1))
    return 2.0 ** (-(s - 1))


def monte_carlo_efficacy(
    mechanism,
    z: PairVector,
    guesser,
    reps: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Mean accuracy v/r and its standard error over independent game runs."""
    if reps < 1:
        raise ConfigError(f"need reps >= 1, got {reps}")
    accs = [audit.run_one_run(mechanism, z, guesser, rng).accuracy for _ in range(reps)]
    return mean_sem(accs)


@dataclasses.dataclass(frozen=True)
class CisSimulation:
    """Guess statistics of certainty-threshold auditing of noiseless
    count-in-sets, played through the real game engines."""

    counts: AuditCounts
    num_sets: int
    set_size: int

    @property
    def guesses_per_set(self) -> float:
        return self.counts.r / self.num_sets

    @property
    def certainty_rate(self) -> float:
        """Fraction of sets on which any guessing happened at all.

        For the non-adaptive guesser this is the all-equal event rate; it
        guesses the whole set when the event occurs, so the per-set guess
        count is the rate scaled by the set size.
        """
        return self.counts.r / self.set_size / self.num_sets


def simulate_cis_guess_counts(
    s: int, num_sets: int, adaptive: bool, rng: np.random.Generator
) -> CisSimulation:
    """Play one big count-in-sets game with a tau = +inf ML guesser."""
    n = s * num_sets
    z = PairVector.binary(n)
    spec = MechanismSpec.make("cis", s=s)
    source = cis_loss_source(s, n, z)
    if adaptive:
        guesser = guessers.AdaptiveMlGuesser(source, tau=math.inf)
        counts = audit.run_adaptive(spec, z, guesser, rng)
    else:
        loss_fn = lambda o: np.array([source(o, i, {}) for i in range(n)])
        counts = audit.run_one_run(spec, z, guessers.ml_guesser(loss_fn, tau=math.inf), rng)
    return CisSimulation(counts=counts, num_sets=num_sets, set_size=s)
