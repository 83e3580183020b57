"""Game engines: classic auditing, one-run auditing, adaptive one-run
auditing, and the invalid full-knowledge variant kept as a negative
demonstration.

Every engine takes an explicit random source and is deterministic given it;
randomness is consumed in a fixed order (secret bits first, then the
mechanism). The ``mechanism`` argument is either a ``MechanismSpec`` or any
``(dataset, rng) -> output`` callable, so simulators can play too.

A run in which the guesser abstains everywhere is an error rather than a
zero-guess outcome: the bound is undefined at r = 0 and an auditor gains
nothing by never guessing.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from . import mechanisms as mech_mod
from .mechanisms import ConfigError, MechanismSpec, PairVector
from .stats import AuditCounts, ExtendedReal, eps_lower_bound, logistic_inv

Mechanism = MechanismSpec | Callable[[Sequence, np.random.Generator], object]


class AllAbstainError(RuntimeError):
    """The guesser abstained on every index; the game requires r >= 1."""


class ProtocolViolationError(RuntimeError):
    """An adaptive guesser revisited an index."""


def _resolve(mechanism: Mechanism) -> Callable[[Sequence, np.random.Generator], object]:
    if isinstance(mechanism, MechanismSpec):
        return mech_mod.sampler(mechanism)
    if callable(mechanism):
        return mechanism
    raise ConfigError(f"not a mechanism: {mechanism!r}")


def sample_secret_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent uniform bits in {-1, +1}."""
    return rng.integers(0, 2, size=n) * 2 - 1


def _validate_guesses(guesses: np.ndarray, n: int) -> np.ndarray:
    guesses = np.asarray(guesses)
    if guesses.shape != (n,):
        raise ConfigError(f"guess vector must have shape ({n},), got {guesses.shape}")
    if not np.isin(guesses, (-1, 0, 1)).all():
        raise ConfigError("guesses must lie in {-1, 0, +1}")
    return guesses.astype(np.int8)


def run_one_run(
    mechanism: Mechanism,
    z: PairVector,
    guesser: Callable[[object], np.ndarray],
    rng: np.random.Generator,
) -> AuditCounts:
    """One play of the one-run auditing game.

    Samples the secret bits, builds the dataset through the pair vector, runs
    the mechanism once, and scores the guess vector.
    """
    sampler = _resolve(mechanism)
    bits = sample_secret_bits(z.n, rng)
    output = sampler(z.dataset(bits), rng)
    guesses = _validate_guesses(guesser(output), z.n)
    taken = int(np.count_nonzero(guesses))
    if taken == 0:
        raise AllAbstainError("guesser abstained on every index")
    correct = int(np.count_nonzero(guesses == bits))
    return AuditCounts(v=correct, r=taken)


def run_classic(
    mechanism: Mechanism,
    base: Sequence,
    j: int,
    x,
    y,
    guesser: Callable[[object], int],
    rounds: int,
    rng: np.random.Generator,
) -> AuditCounts:
    """Classic auditing: ``rounds`` independent runs varying one entry.

    Each round resamples one bit, substitutes ``x`` or ``y`` at 0-based index
    ``j`` of the base dataset, runs the mechanism, and collects one scalar
    guess in {-1, 0, +1}.
    """
    sampler = _resolve(mechanism)
    base = tuple(base)
    if not 0 <= j < len(base):
        raise ConfigError(f"index {j} out of range for dataset of length {len(base)}")
    if x == y:
        raise ConfigError("the candidate elements must differ")
    if rounds < 1:
        raise ConfigError(f"need at least one round, got {rounds}")
    taken = correct = 0
    for _ in range(rounds):
        bit = int(rng.integers(0, 2)) * 2 - 1
        dataset = base[:j] + ((x if bit == -1 else y),) + base[j + 1 :]
        output = sampler(dataset, rng)
        guess = int(guesser(output))
        if guess not in (-1, 0, 1):
            raise ConfigError(f"scalar guess must be in {{-1, 0, +1}}, got {guess}")
        if guess != 0:
            taken += 1
            correct += guess == bit
    if taken == 0:
        raise AllAbstainError("guesser abstained in every round")
    return AuditCounts(v=correct, r=taken)


def run_adaptive(
    mechanism: Mechanism,
    z: PairVector,
    adaptive_guesser,
    rng: np.random.Generator,
) -> AuditCounts:
    """Adaptive one-run auditing.

    The guesser visits indices one at a time; after each visit the true bit
    of that index is revealed to it, whether or not it guessed (an abstention
    still reveals). Each index may be visited at most once; the session may
    stop early by returning ``None``.
    """
    sampler = _resolve(mechanism)
    n = z.n
    bits = sample_secret_bits(n, rng)
    output = sampler(z.dataset(bits), rng)
    session = adaptive_guesser.begin(output, n)

    revealed: dict[int, int] = {}
    taken = correct = 0
    while len(revealed) < n:
        step = session.next_step(revealed)
        if step is None:
            break
        i, guess = step
        if not 0 <= i < n:
            raise ProtocolViolationError(f"index {i} out of range")
        if i in revealed:
            raise ProtocolViolationError(f"index {i} visited twice")
        if guess not in (-1, 0, 1):
            raise ConfigError(f"guess must be in {{-1, 0, +1}}, got {guess}")
        if guess != 0:
            taken += 1
            correct += guess == bits[i]
        revealed[i] = int(bits[i])
    if taken == 0:
        raise AllAbstainError("adaptive guesser abstained on every visited index")
    return AuditCounts(v=correct, r=taken)


def run_full_knowledge(
    mechanism: Mechanism,
    z: PairVector,
    fk_guesser: Callable[[object, int, np.ndarray], int],
    rng: np.random.Generator,
) -> AuditCounts:
    """The invalid full-knowledge variant: the guess for index ``i`` sees all
    true bits except ``S_i`` (masked to 0 in the vector it receives).

    Exists solely to demonstrate that full side knowledge breaks validity.
    """
    sampler = _resolve(mechanism)
    n = z.n
    bits = sample_secret_bits(n, rng)
    output = sampler(z.dataset(bits), rng)
    taken = correct = 0
    for i in range(n):
        masked = bits.copy()
        masked[i] = 0
        guess = int(fk_guesser(output, i, masked))
        if guess not in (-1, 0, 1):
            raise ConfigError(f"guess must be in {{-1, 0, +1}}, got {guess}")
        if guess != 0:
            taken += 1
            correct += guess == bits[i]
    if taken == 0:
        raise AllAbstainError("guesser abstained on every index")
    return AuditCounts(v=correct, r=taken)


def audit_report(counts: AuditCounts, beta: float) -> tuple[ExtendedReal, ExtendedReal]:
    """Privacy-level estimation and statistically corrected lower bound.

    The estimation ``logistic_inv(v / r)`` carries no correction and may be
    negative or infinite; the bound is clamped to [0, inf).
    """
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must be in (0, 1), got {beta}")
    estimation = logistic_inv(counts.v / counts.r)
    bound = eps_lower_bound(counts, beta)
    return estimation, bound
