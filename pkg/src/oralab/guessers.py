"""Guesser constructors.

A static guesser is any callable mapping a mechanism output to a guess vector
in {-1, 0, +1}^n (0 = abstain). Maximum-likelihood guessers consume signed
distributional privacy losses: a positive loss favors the first pair
candidate, i.e. the guess -1; a loss of exactly 0 also guesses -1 (a fixed
convention: either direction succeeds with probability 1/2).

Adaptive guessers additionally receive the true secret bits of the indices
they have already visited; they implement ``begin(output, n)`` returning a
session whose ``next_step(revealed)`` yields ``(index, guess)`` pairs, or
``None`` to stop early.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Callable, Mapping, Sequence

import numpy as np

from . import loss as loss_mod
from .mechanisms import ConfigError, MechanismSpec, PairVector

Guess = int
GuessVector = np.ndarray
StaticGuesser = Callable[[object], GuessVector]


def direction(loss_value: float) -> Guess:
    """The maximum-likelihood guess for a signed loss (ties guess -1)."""
    return -1 if loss_value >= 0 else 1


def topk_indices(abs_losses: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest loss magnitudes, ties to the lowest index.

    Shared by the oracle and the game guessers so both rank identically.
    """
    n = len(abs_losses)
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= {n}, got k={k}")
    order = np.lexsort((np.arange(n), -np.asarray(abs_losses, dtype=float)))
    return order[:k]


def ml_topk(loss_values: Sequence[float], k: int) -> GuessVector:
    """Guess at the ``k`` indices of largest |loss|, abstain elsewhere."""
    losses = np.asarray(loss_values, dtype=float)
    guesses = np.zeros(len(losses), dtype=np.int8)
    for i in topk_indices(np.abs(losses), k):
        guesses[i] = direction(losses[i])
    return guesses


def ml_threshold(loss_values: Sequence[float], tau: float) -> GuessVector:
    """Guess exactly where |loss| >= tau; tau = +inf guesses only at certainty.

    May return an all-abstain vector; the game engines reject those.
    """
    if tau < 0:
        raise ConfigError(f"tau must be >= 0, got {tau}")
    losses = np.asarray(loss_values, dtype=float)
    guesses = np.zeros(len(losses), dtype=np.int8)
    for i in np.flatnonzero(np.abs(losses) >= tau):
        guesses[i] = direction(losses[i])
    return guesses


def dpsgd_sort(scores: Sequence[float], k: int) -> GuessVector:
    """Guess +1 at the k/2 highest scores and -1 at the k/2 lowest.

    ``k`` must be even. Ties are broken toward the lowest index on each side,
    with the +1 side assigned first.
    """
    scores = np.asarray(scores, dtype=float)
    n = len(scores)
    if k % 2:
        raise ConfigError(f"guess budget k must be even, got {k}")
    if not 2 <= k <= n:
        raise ConfigError(f"need 2 <= k <= {n}, got k={k}")
    idx = np.arange(n)
    high = np.lexsort((idx, -scores))[: k // 2]
    guesses = np.zeros(n, dtype=np.int8)
    guesses[high] = 1
    low_order = np.lexsort((idx, scores))
    picked = 0
    for i in low_order:
        if guesses[i] == 0:
            guesses[i] = -1
            picked += 1
            if picked == k // 2:
                break
    return guesses


# --- static guesser factories -------------------------------------------


def identity_guesser(z: PairVector) -> StaticGuesser:
    """Read each output coordinate back as the element it matches."""

    def guess(output) -> GuessVector:
        guesses = np.zeros(z.n, dtype=np.int8)
        for i, (x, y) in enumerate(z.pairs):
            if output[i] == x:
                guesses[i] = -1
            elif output[i] == y:
                guesses[i] = 1
            else:
                raise ConfigError(f"output coordinate {output[i]!r} matches neither candidate")
        return guesses

    return guess


def constant_guesser(values: Sequence[int]) -> StaticGuesser:
    fixed = np.asarray(values, dtype=np.int8)
    return lambda output: fixed.copy()


def ml_guesser(
    loss_fn: Callable[[object], np.ndarray],
    k: int | None = None,
    tau: float | None = None,
) -> StaticGuesser:
    """Maximum-likelihood guesser over per-output loss rows.

    Exactly one of ``k`` (top-k abstention) or ``tau`` (threshold abstention)
    must be given.
    """
    if (k is None) == (tau is None):
        raise ConfigError("exactly one of k or tau must be set")
    if k is not None:
        return lambda output: ml_topk(loss_fn(output), k)
    return lambda output: ml_threshold(loss_fn(output), tau)


def sort_guesser(score_fn: Callable[[object], np.ndarray], k: int) -> StaticGuesser:
    return lambda output: dpsgd_sort(score_fn(output), k)


# --- adaptive guessers -------------------------------------------------------


class AdaptiveMlGuesser:
    """Visits indices in a fixed order, guessing where the conditional loss
    magnitude reaches ``tau``.

    The engine reveals the true bit of every visited index, including
    abstentions, so later conditional losses sharpen as the run proceeds.
    """

    def __init__(
        self,
        loss_source: loss_mod.LossSource,
        tau: float,
        order: Sequence[int] | None = None,
    ):
        if tau < 0:
            raise ConfigError(f"tau must be >= 0, got {tau}")
        self.loss_source = loss_source
        self.tau = tau
        self.order = None if order is None else tuple(order)

    def begin(self, output, n: int) -> "_MlSession":
        order = self.order if self.order is not None else tuple(range(n))
        if sorted(order) != list(range(n)):
            raise ConfigError("order must be a permutation of range(n)")
        return _MlSession(output, order, self.loss_source, self.tau)


@dataclasses.dataclass
class _MlSession:
    output: object
    order: tuple[int, ...]
    loss_source: loss_mod.LossSource
    tau: float
    pos: int = 0

    def next_step(self, revealed: Mapping[int, int]) -> tuple[int, Guess] | None:
        if self.pos >= len(self.order):
            return None
        i = self.order[self.pos]
        self.pos += 1
        value = self.loss_source(self.output, i, revealed)
        guess = direction(value) if abs(value) >= self.tau else 0
        return i, guess


class XipAdaptiveGuesser:
    """The pairwise-XOR attack: abstain on the first element of each pair,
    then decode the second from the revealed partner bit."""

    def __init__(self, z: PairVector):
        for x, y in z.pairs:
            if (x, y) != (0, 1):
                raise ConfigError("the pairwise-XOR guesser assumes (0, 1) pairs")
        self.n = z.n

    def begin(self, output, n: int) -> "_XipSession":
        if n != self.n or n % 2:
            raise ConfigError(f"expected even n={self.n}, got {n}")
        return _XipSession(output, n)


@dataclasses.dataclass
class _XipSession:
    output: object
    n: int
    pos: int = 0

    def next_step(self, revealed: Mapping[int, int]) -> tuple[int, Guess] | None:
        i = self.pos
        if i >= self.n:
            return None
        self.pos += 1
        if i % 2 == 0:
            return i, 0
        partner_elem = (revealed[i - 1] + 1) // 2
        elem = self.output[i // 2] ^ partner_elem
        return i, 2 * elem - 1


# --- full-knowledge guessers -------------------------------------------------


def xor_parity_fk_guesser(z: PairVector) -> Callable[[object, int, np.ndarray], Guess]:
    """Full-knowledge attack on parity outputs over (0, 1) pairs: decode bit i
    as the output XOR the parity of all other (known) bits."""
    for x, y in z.pairs:
        if (x, y) != (0, 1):
            raise ConfigError("the parity guesser assumes (0, 1) pairs")

    def guess(output, i: int, others: np.ndarray) -> Guess:
        known = [(int(b) + 1) // 2 for j, b in enumerate(others) if j != i]
        elem = (int(output) + sum(known)) % 2
        return 2 * elem - 1

    return guess


# --- spec-driven construction ------------------------------------------------


@dataclasses.dataclass(frozen=True)
class GuesserSpec:
    """Guesser identifier plus numeric parameters, mirroring MechanismSpec."""

    kind: str
    params: tuple[tuple[str, float], ...] = ()

    KINDS = ("identity", "ml_topk", "ml_threshold", "dpsgd_sort", "adaptive_ml", "xip_adaptive")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown guesser kind {self.kind!r}")

    @classmethod
    def make(cls, kind: str, **params: float) -> "GuesserSpec":
        return cls(kind, tuple(sorted((k, float(v)) for k, v in params.items())))

    def param(self, name: str, default: float | None = None) -> float:
        for k, v in self.params:
            if k == name:
                return v
        if default is None:
            raise ConfigError(f"guesser {self.kind!r} needs param {name!r}")
        return default

    def to_text(self) -> str:
        parts = [self.kind]
        parts += [f"{k}={v:g}" for k, v in self.params]
        return " ".join(parts)

    @classmethod
    def parse(cls, text: str) -> "GuesserSpec":
        tokens = text.split()
        if not tokens:
            raise ConfigError("empty guesser spec")
        params = {}
        for tok in tokens[1:]:
            if "=" not in tok:
                raise ConfigError(f"bad guesser param {tok!r}, expected key=value")
            key, value = tok.split("=", 1)
            params[key] = math.inf if value == "inf" else float(value)
        return cls.make(tokens[0], **params)


def build_static_guesser(
    spec: GuesserSpec, mech: MechanismSpec, z: PairVector
) -> StaticGuesser:
    """Construct a static guesser for a one-run game against ``mech``."""
    if spec.kind == "identity":
        return identity_guesser(z)
    if spec.kind in ("ml_topk", "ml_threshold"):
        loss_fn = _loss_row_fn(mech, z)
        if spec.kind == "ml_topk":
            return ml_guesser(loss_fn, k=int(spec.param("k")))
        return ml_guesser(loss_fn, tau=spec.param("tau"))
    raise ConfigError(f"guesser {spec.kind!r} is not a static one-run guesser")


def build_adaptive_guesser(spec: GuesserSpec, mech: MechanismSpec, z: PairVector):
    if spec.kind == "xip_adaptive":
        return XipAdaptiveGuesser(z)
    if spec.kind == "adaptive_ml":
        source = loss_mod.spec_loss_source(mech, z)
        return AdaptiveMlGuesser(source, tau=spec.param("tau"))
    raise ConfigError(f"guesser {spec.kind!r} is not an adaptive guesser")


def _loss_row_fn(mech: MechanismSpec, z: PairVector) -> Callable[[object], np.ndarray]:
    """Per-output signed loss rows for ML guessers, via the cheapest exact path."""
    if mech.kind in ("xor", "xip", "aon", "nas", "xrr"):
        from . import mechanisms

        table = loss_mod.build_loss_table(mechanisms.model(mech, z.n), z)
        return table.loss_fn()
    # Local mechanisms and counting queries have closed-form losses at any n.
    source = loss_mod.spec_loss_source(mech, z)
    n = z.n
    return lambda output: np.array([source(output, i, {}) for i in range(n)])
