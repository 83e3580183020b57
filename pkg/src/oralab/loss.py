"""Exact distributional privacy loss.

For a mechanism restricted through a pair vector, the loss at index ``i`` and
output ``o`` is the log-likelihood ratio

    l_i(o) = ln Pr[O = o | S_i = -1] - ln Pr[O = o | S_i = +1]

with the conditionals marginalizing every other secret bit under the uniform
prior. A positive loss favors the hypothesis ``S_i = -1`` (the first pair
candidate). Ratios against zero follow the conventions x/0 = +inf and
0/x = -inf; 0/0 marks an output unreachable under the conditioning and is an
error.

Probabilities are accumulated in linear space over at most ``2**12``
dataset settings; anything below the float64 underflow threshold (~e^-745)
collapses to 0 and therefore to a +/-inf loss rather than to a silent
near-certainty.
"""

from __future__ import annotations

import dataclasses
import functools
import itertools
import math
from collections.abc import Callable, Mapping

import numpy as np

from .mechanisms import ConfigError, MechanismModel, MechanismSpec, PairVector, cis_sets

#: ``(output, index, revealed bits) -> signed loss`` used by adaptive guessers.
LossSource = Callable[[object, int, Mapping[int, int]], float]


class UnreachableOutputError(ValueError):
    """The output has probability zero under both hypotheses."""


def _guard_n(n: int) -> None:
    if n > 12:
        raise ConfigError(f"brute-force enumeration is limited to n <= 12, got {n}")


def _log_ratio(num: float, den: float) -> float:
    if num == 0.0 and den == 0.0:
        raise UnreachableOutputError("output unreachable under both hypotheses")
    if den == 0.0:
        return math.inf
    if num == 0.0:
        return -math.inf
    return math.log(num) - math.log(den)


def _mean_prob(model: MechanismModel, z: PairVector, o: object, fixed: Mapping[int, int]) -> float:
    """Average of Pr[O=o | dataset] over the uniform prior on the free bits."""
    free = [i for i in range(z.n) if i not in fixed]
    total = 0.0
    bits = [0] * z.n
    for i, b in fixed.items():
        bits[i] = b
    for combo in itertools.product((-1, 1), repeat=len(free)):
        for i, b in zip(free, combo):
            bits[i] = b
        total += model.conditional_prob(o, z.dataset(bits))
    return total / 2 ** len(free)


def brute_force_loss(model: MechanismModel, z: PairVector, i: int, o: object) -> float:
    """Distributional privacy loss at index ``i`` by exact enumeration."""
    _guard_n(z.n)
    if not 0 <= i < z.n:
        raise ConfigError(f"index {i} out of range for n={z.n}")
    num = _mean_prob(model, z, o, {i: -1})
    den = _mean_prob(model, z, o, {i: +1})
    return _log_ratio(num, den)


def conditional_loss(
    model: MechanismModel,
    z: PairVector,
    i: int,
    o: object,
    revealed: Mapping[int, int],
) -> float:
    """Loss at index ``i`` conditioned on already-revealed secret bits.

    Reduces to ``brute_force_loss`` when ``revealed`` is empty. ``revealed``
    must not assign index ``i`` itself.
    """
    _guard_n(z.n)
    if i in revealed:
        raise ConfigError(f"revealed bits must exclude the target index {i}")
    num = _mean_prob(model, z, o, {**revealed, i: -1})
    den = _mean_prob(model, z, o, {**revealed, i: +1})
    return _log_ratio(num, den)


@dataclasses.dataclass(frozen=True)
class LossTable:
    """Per-output, per-index losses plus the output marginals.

    Only outputs reachable under the uniform prior appear; ``losses`` has one
    row per reachable output and one column per index, with +/-inf entries
    where one hypothesis makes the output impossible.
    """

    outputs: tuple
    marginals: np.ndarray
    losses: np.ndarray
    cond_minus: np.ndarray
    cond_plus: np.ndarray

    _index: dict = dataclasses.field(repr=False, hash=False, compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        self._index.update({o: k for k, o in enumerate(self.outputs)})

    @property
    def n(self) -> int:
        return self.losses.shape[1]

    def loss_row(self, o: object) -> np.ndarray:
        """Signed losses at every index for output ``o``."""
        try:
            return self.losses[self._index[o]]
        except KeyError:
            raise UnreachableOutputError(f"output {o!r} has probability zero") from None

    def loss_fn(self) -> Callable[[object], np.ndarray]:
        return self.loss_row


def build_loss_table(model: MechanismModel, z: PairVector) -> LossTable:
    """Enumerate all ``2**n`` secret vectors and tabulate losses exactly."""
    n = z.n
    _guard_n(n)
    bit_rows = np.array(list(itertools.product((-1, 1), repeat=n)))
    prob_rows = np.array([model.prob_row(z.dataset(bits)) for bits in bit_rows])

    marginals = prob_rows.mean(axis=0)
    # Conditionals given S_i = -1 / +1: average over the matching half.
    minus_mask = (bit_rows == -1).astype(float)
    cond_minus = (minus_mask.T @ prob_rows) / (len(bit_rows) / 2)
    cond_plus = ((1.0 - minus_mask).T @ prob_rows) / (len(bit_rows) / 2)

    reachable = marginals > 0.0
    marginals = marginals[reachable]
    cond_minus = cond_minus[:, reachable].T
    cond_plus = cond_plus[:, reachable].T
    outputs = tuple(o for o, keep in zip(model.alphabet, reachable) if keep)

    with np.errstate(divide="ignore"):
        losses = np.log(cond_minus) - np.log(cond_plus)

    return LossTable(
        outputs=outputs,
        marginals=marginals,
        losses=losses,
        cond_minus=cond_minus,
        cond_plus=cond_plus,
    )


def model_loss_source(model: MechanismModel, z: PairVector) -> LossSource:
    """Brute-force conditional losses as an adaptive-guesser loss source."""
    return lambda o, i, revealed: conditional_loss(model, z, i, o, revealed)


# --- analytic closed forms ---------------------------------------------------


def count_loss_analytic(n: int, o: int) -> float:
    """|ln((n - o) / o)|, the loss magnitude of an n-element counting query.

    The extreme outputs 0 and n identify every element and map to +inf,
    following the convention x/0 = inf.
    """
    if not 0 <= o <= n:
        raise ConfigError(f"count output must be in [0, {n}], got {o}")
    if o == 0 or o == n:
        return math.inf
    return abs(math.log((n - o) / o))


def count_conditional_loss(o_res: int, s_res: int) -> float:
    """Signed loss of one element of a noiseless count over ``s_res`` unknowns.

    ``o_res`` is the count after subtracting all revealed elements. Equals
    ln((s_res - o_res) / o_res): +inf when the residual is all zeros, -inf
    when it is all ones.
    """
    if s_res < 1:
        raise ConfigError(f"need s_res >= 1, got {s_res}")
    if not 0 <= o_res <= s_res:
        raise UnreachableOutputError(f"residual count {o_res} impossible for {s_res} unknowns")
    if o_res == 0:
        return math.inf
    if o_res == s_res:
        return -math.inf
    return math.log(s_res - o_res) - math.log(o_res)


@functools.lru_cache(maxsize=None)
def _log_binom_weights(m: int) -> tuple[float, ...]:
    """ln Binomial(m, 1/2) PMF at 0..m."""
    return tuple(math.lgamma(m + 1) - math.lgamma(c + 1) - math.lgamma(m - c + 1) - m * math.log(2)
                 for c in range(m + 1))


def _logsumexp(values: list[float]) -> float:
    top = max(values)
    if top == -math.inf:
        return -math.inf
    return top + math.log(sum(math.exp(v - top) for v in values))


def gaussian_mixture_loss_signed(o: float, s: int, sigma: float) -> float:
    """Signed loss of one element of a noisy count over a set of size ``s``.

    The other ``s - 1`` elements contribute a Binomial(s-1, 1/2) count ``c``
    and the observation is Gaussian around ``c`` (element absent) or ``c + 1``
    (element present):

        ln [ sum_c Bin(s-1,1/2;c) phi((o - c)/sigma) ]
         - ln [ sum_c Bin(s-1,1/2;c) phi((o - c - 1)/sigma) ]

    computed in log space.
    """
    if s < 1:
        raise ConfigError(f"need s >= 1, got {s}")
    if sigma <= 0:
        raise ConfigError(f"need sigma > 0, got {sigma}")
    w = _log_binom_weights(s - 1)
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    num = _logsumexp([w[c] - (o - c) ** 2 * inv2s2 for c in range(s)])
    den = _logsumexp([w[c] - (o - c - 1) ** 2 * inv2s2 for c in range(s)])
    return num - den


def gaussian_mixture_loss(o: float, s: int, sigma: float) -> float:
    """Magnitude of the noisy-count loss; see ``gaussian_mixture_loss_signed``."""
    return abs(gaussian_mixture_loss_signed(o, s, sigma))


def local_laplace_loss(o: float, eps: float) -> float:
    """Signed per-coordinate loss of Laplace noising on the (-1, +1) pair.

    With noise scale b = 2/eps the log-density ratio is
    (|o - 1| - |o + 1|) * eps / 2, saturating at -/+eps outside [-1, 1].
    """
    if not 0.0 < eps < math.inf:
        raise ConfigError(f"need finite eps > 0, got {eps}")
    return (abs(o - 1.0) - abs(o + 1.0)) * eps / 2.0


# --- loss sources for non-enumerable instances -------------------------------


def rr_loss_source(eps: float, z: PairVector) -> LossSource:
    """Per-coordinate randomized-response losses for a local RR mechanism.

    The mechanism factorizes, so conditioning on revealed bits changes
    nothing: the loss at index ``i`` is +eps when the output coordinate shows
    the first pair candidate and -eps when it shows the second.
    """

    def source(o, i: int, revealed: Mapping[int, int]) -> float:
        x, y = z.pairs[i]
        if o[i] == x:
            return eps
        if o[i] == y:
            return -eps
        raise UnreachableOutputError(f"output coordinate {o[i]!r} matches neither candidate")

    return source


def laplace_loss_source(eps: float, z: PairVector) -> LossSource:
    """Per-coordinate losses for local Laplace noising on (-1, +1) pairs."""
    for x, y in z.pairs:
        if (x, y) != (-1, 1):
            raise ConfigError("laplace losses assume (-1, +1) pairs")
    return lambda o, i, revealed: local_laplace_loss(float(o[i]), eps)


def _require_binary_pairs(z: PairVector, what: str) -> None:
    for x, y in z.pairs:
        if (x, y) != (0, 1):
            raise ConfigError(f"{what} losses assume (0, 1) pairs")


def cis_loss_source(set_size: int, n: int, z: PairVector | None = None) -> LossSource:
    """Conditional losses for noiseless count-in-sets over (0, 1) pairs.

    For index ``i`` in a set, subtract the revealed members' values from the
    set's count and apply the noiseless-count closed form to the residual.
    """
    if z is not None:
        _require_binary_pairs(z, "count-in-sets")
    blocks = cis_sets(n, set_size)
    block_of = {}
    for k, block in enumerate(blocks):
        for i in block:
            block_of[i] = k

    def source(o, i: int, revealed: Mapping[int, int]) -> float:
        k = block_of[i]
        o_res = o[k]
        s_res = 0
        for j in blocks[k]:
            if j == i:
                s_res += 1
            elif j in revealed:
                o_res -= (revealed[j] + 1) // 2
            else:
                s_res += 1
        return count_conditional_loss(o_res, s_res)

    return source


def count_loss_source(n: int, z: PairVector | None = None) -> LossSource:
    """Conditional losses for a single noiseless counting query (scalar output)."""
    inner = cis_loss_source(n, n, z)
    return lambda o, i, revealed: inner((o,), i, revealed)


def spec_loss_source(spec: MechanismSpec, z: PairVector) -> LossSource:
    """The natural loss source for a mechanism spec.

    Local mechanisms get their closed form; small discrete mechanisms fall
    back to brute-force conditioning.
    """
    if spec.kind in ("lrr", "rr"):
        return rr_loss_source(spec.param("eps"), z)
    if spec.kind == "laplace":
        return laplace_loss_source(spec.param("eps"), z)
    if spec.kind == "cis":
        return cis_loss_source(int(spec.param("s")), z.n, z)
    if spec.kind == "count":
        return count_loss_source(z.n, z)
    from . import mechanisms

    return model_loss_source(mechanisms.model(spec, z.n), z)
