"""Dirac-canary DP-SGD simulator, canary assignment, the subsampled-Gaussian
noise calibrator, and the single-step adaptive-auditing comparison.

The white-box adversary observes all intermediate weights and knows the
learning rate, so the per-step noisy gradient sums carry exactly the same
information as the weight trajectory. The simulator therefore emits the sums
directly: each auditing gradient is zero except at its assigned coordinate,
where it equals the clipping radius, so no gradient computation takes place.
Clipping radius and learning rate default to 1 and do not affect the audit.

Randomness order within a step batch: one T x n matrix of inclusion draws,
then one T x d matrix of Gaussian noise, so runs are reproducible from the
generator seed alone.
"""

from __future__ import annotations

import dataclasses
import functools
import math

import numpy as np

from . import audit, guessers
from .loss import _log_binom_weights, gaussian_mixture_loss_signed
from .mechanisms import ConfigError, PairVector
from .stats import AuditCounts


class CalibrationError(RuntimeError):
    """No noise scale in range satisfies the privacy target."""


@dataclasses.dataclass(frozen=True)
class DpSgdConfig:
    """Simulation parameters; defaults follow the main experimental setup."""

    n: int
    sigma: float
    d: int = 1000
    steps: int = 100
    sample_rate: float = 0.1
    clip: float = 1.0
    lr: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 1 or self.d < 1 or self.steps < 1:
            raise ConfigError("n, d, and steps must be positive")
        if not 0.0 < self.sample_rate <= 1.0:
            raise ConfigError(f"sample_rate must be in (0, 1], got {self.sample_rate}")
        if self.sigma <= 0 or self.clip <= 0 or self.lr <= 0:
            raise ConfigError("sigma, clip, and lr must be positive")


def assign_canaries(n: int, d: int) -> np.ndarray:
    """Round-robin coordinate assignment: distinct coordinates while n <= d,
    an equal number of elements per coordinate when n > d."""
    if n < 1 or d < 1:
        raise ConfigError("n and d must be positive")
    if n > d and n % d:
        raise ConfigError(f"n={n} exceeds d={d} and is not a multiple of it")
    return np.arange(n) % d


def simulate(
    config: DpSgdConfig,
    bits: np.ndarray,
    assignment: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Observed noisy gradient sums, one length-d row per step.

    Elements with bit +1 are in the dataset and enter each step's batch
    independently with the sample rate; elements with bit -1 are the zero
    member of their pair and contribute nothing. Each batched element adds
    the clipping radius at its coordinate, and every coordinate receives
    independent Gaussian noise of scale sigma * clip.
    """
    bits = np.asarray(bits)
    if bits.shape != (config.n,):
        raise ConfigError(f"expected {config.n} bits, got shape {bits.shape}")
    if len(assignment) != config.n:
        raise ConfigError("assignment length must match n")
    included = bits > 0
    draws = rng.random((config.steps, config.n)) < config.sample_rate
    batched = draws & included
    counts = np.zeros((config.steps, config.d))
    for t in range(config.steps):
        counts[t] = np.bincount(assignment[batched[t]], minlength=config.d)
    noise = rng.normal(0.0, config.sigma * config.clip, (config.steps, config.d))
    return config.clip * counts + noise


def element_scores(
    sums: np.ndarray, assignment: np.ndarray, step: int | None = None
) -> np.ndarray:
    """Per-element attack scores: the recovered sum at the element's
    coordinate, aggregated over all steps (or read from one step)."""
    sums = np.asarray(sums)
    if step is None:
        totals = sums.sum(axis=0)
    else:
        totals = sums[step]
    return totals[np.asarray(assignment)]


def simulator(config: DpSgdConfig, assignment: np.ndarray):
    """The simulation as a game-engine mechanism over (0, 1) inclusion pairs."""

    def mechanism(dataset, rng: np.random.Generator) -> np.ndarray:
        bits = np.asarray(dataset) * 2 - 1
        return simulate(config, bits, assignment, rng)

    return mechanism


# --- RDP accountant -----------------------------------------------------------

#: Integer Renyi orders scanned by the accountant.
RDP_ORDERS = tuple(range(2, 65))


def rdp_subsampled_gaussian(q: float, sigma: float, alpha: int) -> float:
    """Per-step Renyi divergence bound of the Poisson-subsampled Gaussian
    mechanism at integer order ``alpha``.

    Uses the binomial expansion of the alpha-th moment of the mixture
    likelihood ratio, exact for integer orders; q = 1 reduces to the pure
    Gaussian value alpha / (2 sigma^2).
    """
    if not 0.0 < q <= 1.0:
        raise ConfigError(f"q must be in (0, 1], got {q}")
    if sigma <= 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    if alpha < 2 or alpha != int(alpha):
        raise ConfigError(f"alpha must be an integer >= 2, got {alpha}")
    if q == 1.0:
        return alpha / (2.0 * sigma * sigma)
    terms = [
        math.lgamma(alpha + 1)
        - math.lgamma(k + 1)
        - math.lgamma(alpha - k + 1)
        + k * math.log(q)
        + (alpha - k) * math.log1p(-q)
        + (k * k - k) / (2.0 * sigma * sigma)
        for k in range(alpha + 1)
    ]
    top = max(terms)
    log_moment = top + math.log(sum(math.exp(t - top) for t in terms))
    return log_moment / (alpha - 1)


def rdp_epsilon(sigma: float, delta: float, steps: int, q: float) -> float:
    """(eps, delta) privacy of ``steps`` compositions, minimized over orders."""
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must be in (0, 1), got {delta}")
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    log_inv_delta = math.log(1.0 / delta)
    return min(
        steps * rdp_subsampled_gaussian(q, sigma, a) + log_inv_delta / (a - 1)
        for a in RDP_ORDERS
    )


#: Absolute tolerance of the noise-scale search.
SIGMA_TOL = 1e-3

_SIGMA_MAX = 1e3


@functools.lru_cache(maxsize=None)
def rdp_noise_scale(eps: float, delta: float, steps: int, q: float) -> float:
    """Smallest noise scale meeting the (eps, delta) target, to ``SIGMA_TOL``."""
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    lo, hi = 0.0, 1.0
    while rdp_epsilon(hi, delta, steps, q) > eps:
        lo, hi = hi, hi * 2.0
        if hi > _SIGMA_MAX:
            raise CalibrationError(f"no sigma <= {_SIGMA_MAX} reaches eps={eps}")
    while hi - lo > SIGMA_TOL:
        mid = 0.5 * (lo + hi)
        if rdp_epsilon(mid, delta, steps, q) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


# --- single-step audits --------------------------------------------------------


def noisy_sum_loss_source(config: DpSgdConfig, assignment: np.ndarray):
    """Conditional losses for single-step, full-batch observed sums.

    Elements sharing a coordinate form an independent noisy count. Revealed
    members shrink the set and shift the observation; the residual follows
    the Gaussian-mixture closed form.
    """
    if config.steps != 1 or config.sample_rate != 1.0:
        raise ConfigError("closed-form losses require steps=1 and sample_rate=1")
    members: list[list[int]] = [[] for _ in range(config.d)]
    for i, c in enumerate(assignment):
        members[int(c)].append(i)

    def source(output, i: int, revealed) -> float:
        coord = int(assignment[i])
        o_res = float(output[0][coord]) / config.clip
        s_res = 0
        for j in members[coord]:
            if j == i:
                s_res += 1
            elif j in revealed:
                o_res -= (revealed[j] + 1) // 2
            else:
                s_res += 1
        return gaussian_mixture_loss_signed(o_res, s_res, config.sigma)

    return source


def noisy_sum_loss_rows(config: DpSgdConfig, assignment: np.ndarray):
    """Vectorized unconditional losses for every element of a single-step,
    full-batch observation; the per-coordinate mixture loss is broadcast to
    the coordinate's members."""
    if config.steps != 1 or config.sample_rate != 1.0:
        raise ConfigError("closed-form losses require steps=1 and sample_rate=1")
    assignment = np.asarray(assignment)
    sizes = np.bincount(assignment, minlength=config.d)
    inv2s2 = 1.0 / (2.0 * config.sigma * config.sigma)

    def rows(output) -> np.ndarray:
        obs = np.asarray(output[0]) / config.clip
        coord_loss = np.zeros(config.d)
        for s in np.unique(sizes[sizes > 0]):
            coords = np.flatnonzero(sizes == s)
            o = obs[coords][:, None]
            c = np.arange(s)[None, :]
            w = np.asarray(_log_binom_weights(int(s) - 1))[None, :]
            num = _np_logsumexp(w - (o - c) ** 2 * inv2s2)
            den = _np_logsumexp(w - (o - c - 1) ** 2 * inv2s2)
            coord_loss[coords] = num - den
        return coord_loss[assignment]

    return rows


def _np_logsumexp(a: np.ndarray) -> np.ndarray:
    top = a.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(a - top).sum(axis=1, keepdims=True)))[:, 0]


def single_step_audit(
    config: DpSgdConfig,
    tau: float,
    rng: np.random.Generator,
    adaptive: bool,
) -> AuditCounts:
    """One single-step, full-batch audit with threshold-tau ML guessing.

    The adaptive variant plays the adaptive engine with conditional
    Gaussian-mixture losses per shared-coordinate group; the non-adaptive
    comparison thresholds the same losses unconditionally.
    """
    assignment = assign_canaries(config.n, config.d)
    mechanism = simulator(config, assignment)
    z = PairVector.binary(config.n)
    if adaptive:
        source = noisy_sum_loss_source(config, assignment)
        guesser = guessers.AdaptiveMlGuesser(source, tau=tau)
        return audit.run_adaptive(mechanism, z, guesser, rng)
    loss_fn = noisy_sum_loss_rows(config, assignment)
    return audit.run_one_run(mechanism, z, guessers.ml_guesser(loss_fn, tau=tau), rng)
