"""Binomial tail statistics and the logistic bridge from guess counts to epsilon.

Every audit game in this package reduces to the same statistical core: count
correct guesses ``v`` out of taken guesses ``r``, lower-bound the per-guess
success probability with an exact Clopper-Pearson bound, and map the result
through the inverse logistic function onto the privacy-level scale.

Extended reals are plain floats: ``math.inf`` and ``-math.inf`` are valid
values everywhere, with the conventions ``logistic(-inf) = 0`` and
``logistic(inf) = 1``.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Sequence

from scipy import stats as _sps

ExtendedReal = float

#: Absolute bisection tolerance for the Clopper-Pearson lower bound.
CPL_TOL = 1e-10


@dataclasses.dataclass(frozen=True)
class AuditCounts:
    """Outcome of one audit game: ``v`` correct guesses out of ``r`` taken."""

    v: int
    r: int

    def __post_init__(self) -> None:
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if not 0 <= self.v <= self.r:
            raise ValueError(f"need 0 <= v <= r, got v={self.v}, r={self.r}")

    @property
    def accuracy(self) -> float:
        return self.v / self.r


def logistic(x: ExtendedReal) -> float:
    """Standard logistic function e^x / (e^x + 1), stable for large ``|x|``."""
    if x == math.inf:
        return 1.0
    if x == -math.inf:
        return 0.0
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (ex + 1.0)


def logistic_inv(q: float) -> ExtendedReal:
    """Inverse logistic. ``q`` must lie in [0, 1]; the endpoints map to -/+inf."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q}")
    if q == 0.0:
        return -math.inf
    if q == 1.0:
        return math.inf
    return math.log(q) - math.log1p(-q)


def binom_tail_geq(r: int, q: float, v: int) -> float:
    """Upper tail Pr[Binomial(r, q) >= v]."""
    if not 0 <= v <= r:
        raise ValueError(f"need 0 <= v <= r, got v={v}, r={r}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q}")
    if v == 0:
        return 1.0
    # sf evaluates the regularized incomplete beta, which is the exact tail up
    # to float rounding; no PMF summation underflow even at r ~ 1e6.
    return float(_sps.binom.sf(v - 1, r, q))


def cpl(r: int, v: int, beta: float) -> float:
    """Clopper-Pearson lower confidence bound for a binomial proportion.

    Returns ``sup {p in [0,1] : Pr[Binomial(r, p) >= v] <= beta}``, located by
    bisection on the tail probability to absolute tolerance ``CPL_TOL``. The
    supremum of the empty set (``v = 0``, where the tail is identically 1) is
    0 by convention.

    Args:
      r: Number of trials, at least 1.
      v: Number of successes, ``0 <= v <= r``.
      beta: Allowed failure probability, in the open interval (0, 1).

    Returns:
      The exact one-sided lower bound on the success probability.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if not 0 <= v <= r:
        raise ValueError(f"need 0 <= v <= r, got v={v}, r={r}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    return _cpl_bisect(r, v, beta)


def _cpl_bisect(r: int, v: int, beta: float) -> float:
    if v == 0:
        return 0.0
    # The tail is continuous and nondecreasing in p, 0 at p=0 and 1 at p=1,
    # so the sup is the unique root of tail(p) = beta.
    lo, hi = 0.0, 1.0
    while hi - lo > CPL_TOL:
        mid = 0.5 * (lo + hi)
        if binom_tail_geq(r, mid, v) <= beta:
            lo = mid
        else:
            hi = mid
    return lo


def eps_lower_bound(counts: AuditCounts, beta: float) -> ExtendedReal:
    """High-confidence lower bound on the privacy level from audit counts.

    Computes ``sup {eps >= 0 : Pr[Binomial(r, logistic(eps)) >= v] <= beta}``.
    The set is empty exactly when the Clopper-Pearson bound falls below 1/2,
    in which case the bound is 0: an audit can never certify negative leakage.
    """
    q = cpl(counts.r, counts.v, beta)
    if q <= 0.5:
        return 0.0
    return logistic_inv(q)


def mean_sem(samples: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and standard error of the mean.

    The SEM uses the sample standard deviation (ddof=1) divided by sqrt(n),
    and is 0 for a single sample.
    """
    n = len(samples)
    if n == 0:
        raise ValueError("mean_sem requires at least one sample")
    mean = math.fsum(samples) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in samples) / (n - 1)
    return mean, math.sqrt(var / n)
