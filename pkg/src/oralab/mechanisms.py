"""The audited algorithms: randomized-response family, gap toys, counting
queries, and Laplace noising.

Each mechanism is exposed two ways: as a sampler that draws one output from
an explicit random source, and (for the small discrete mechanisms) as an
exactly enumerable conditional distribution ``Pr[O = o | D]`` consumed by the
brute-force loss and efficacy oracles.

Datasets are ordered tuples over a binary universe: {-1, +1} for the
randomized-response family and Laplace noising, {0, 1} for everything else.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from typing import Any

import numpy as np

from .stats import logistic

#: AON's distinguished no-disclosure symbol. A named symbol (rather than an
#: empty vector) keeps the output alphabet finite and enumerable.
NULL = "null"

#: Largest n for which exact model enumeration is supported.
MAX_MODEL_N = 12

Dataset = tuple[Any, ...]
Output = Any


class ConfigError(ValueError):
    """A mechanism, guesser, or engine was configured inconsistently."""


class UnsupportedModelError(ValueError):
    """Exact enumeration was requested for a non-enumerable mechanism."""


@dataclasses.dataclass(frozen=True)
class MechanismSpec:
    """A mechanism identifier plus its numeric parameters.

    Serializes to the plain-text form ``"kind key=value ..."`` used by the
    CLI and the experiment manifests, e.g. ``"lrr eps=1"`` or ``"cis s=4"``.
    """

    kind: str
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _REGISTRY:
            raise ConfigError(f"unknown mechanism kind {self.kind!r}")
        given = {k for k, _ in self.params}
        expected = set(_REGISTRY[self.kind].param_names)
        if given != expected:
            raise ConfigError(
                f"mechanism {self.kind!r} takes params {sorted(expected)}, got {sorted(given)}"
            )

    @classmethod
    def make(cls, kind: str, **params: float) -> "MechanismSpec":
        return cls(kind, tuple(sorted((k, float(v)) for k, v in params.items())))

    def param(self, name: str) -> float:
        for k, v in self.params:
            if k == name:
                return v
        raise KeyError(name)

    def to_text(self) -> str:
        parts = [self.kind]
        parts += [f"{k}={_fmt_param(v)}" for k, v in self.params]
        return " ".join(parts)

    @classmethod
    def parse(cls, text: str) -> "MechanismSpec":
        tokens = text.split()
        if not tokens:
            raise ConfigError("empty mechanism spec")
        kind, params = tokens[0], {}
        for tok in tokens[1:]:
            if "=" not in tok:
                raise ConfigError(f"bad mechanism param {tok!r}, expected key=value")
            key, value = tok.split("=", 1)
            params[key] = float(value)
        return cls.make(kind, **params)


def _fmt_param(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == int(v):
        return str(int(v))
    return repr(v)


@dataclasses.dataclass(frozen=True)
class PairVector:
    """Per-index pair of candidate elements; the secret bit selects one.

    The induced dataset is ``D_i = x_i`` when ``S_i = -1`` and ``D_i = y_i``
    when ``S_i = +1``.
    """

    pairs: tuple[tuple[Any, Any], ...]

    def __post_init__(self) -> None:
        for i, (x, y) in enumerate(self.pairs):
            if x == y:
                raise ConfigError(f"pair {i} has equal candidates {x!r}")

    @property
    def n(self) -> int:
        return len(self.pairs)

    def dataset(self, bits: Sequence[int]) -> Dataset:
        if len(bits) != self.n:
            raise ConfigError(f"expected {self.n} bits, got {len(bits)}")
        return tuple(x if b == -1 else y for (x, y), b in zip(self.pairs, bits))

    @classmethod
    def binary(cls, n: int) -> "PairVector":
        """The canonical (0, 1) pair at every index."""
        return cls(((0, 1),) * n)

    @classmethod
    def signs(cls, n: int) -> "PairVector":
        """The canonical (-1, +1) pair at every index."""
        return cls(((-1, 1),) * n)

    @classmethod
    def include_exclude(cls, values: Iterable[Any], zero: Any = 0) -> "PairVector":
        """Steinke-style include/exclude pairs: the first candidate is a
        designated zero element, the second the value to possibly include."""
        return cls(tuple((zero, v) for v in values))


class MechanismModel:
    """Exact conditional output distribution of a small discrete mechanism."""

    def __init__(
        self,
        alphabet: Sequence[Output],
        prob: Callable[[Output, Dataset], float],
        row: Callable[[Dataset], np.ndarray] | None = None,
    ):
        self.alphabet: tuple[Output, ...] = tuple(alphabet)
        self._index = {o: i for i, o in enumerate(self.alphabet)}
        self._prob = prob
        self._row = row

    def conditional_prob(self, o: Output, dataset: Sequence[Any]) -> float:
        return self._prob(o, tuple(dataset))

    def prob_row(self, dataset: Sequence[Any]) -> np.ndarray:
        """Probabilities of every alphabet symbol given ``dataset``."""
        d = tuple(dataset)
        if self._row is not None:
            return self._row(d)
        return np.array([self._prob(o, d) for o in self.alphabet])

    def index_of(self, o: Output) -> int:
        return self._index[o]

    @classmethod
    def from_table(
        cls, alphabet: Sequence[Output], rows: Mapping[Dataset, Sequence[float]]
    ) -> "MechanismModel":
        table = {d: np.asarray(r, dtype=float) for d, r in rows.items()}
        index = {o: i for i, o in enumerate(alphabet)}
        return cls(
            alphabet,
            prob=lambda o, d: float(table[d][index[o]]),
            row=lambda d: table[d],
        )


@dataclasses.dataclass(frozen=True)
class _MechDef:
    param_names: tuple[str, ...]
    universe: tuple[Any, ...]
    sample: Callable[[MechanismSpec, Dataset, np.random.Generator], Output]
    model: Callable[[MechanismSpec, int], MechanismModel] | None


def _check_domain(dataset: Dataset, universe: tuple[Any, ...], kind: str) -> None:
    for x in dataset:
        if x not in universe:
            raise ConfigError(f"{kind} expects elements in {universe}, got {x!r}")


def _one_hot_model(alphabet: Sequence[Output], fn: Callable[[Dataset], Output]) -> MechanismModel:
    index = {o: i for i, o in enumerate(alphabet)}
    size = len(index)

    def row(d: Dataset) -> np.ndarray:
        out = np.zeros(size)
        out[index[fn(d)]] = 1.0
        return out

    return MechanismModel(alphabet, prob=lambda o, d: 1.0 if fn(d) == o else 0.0, row=row)


def _guard_model_n(kind: str, n: int) -> None:
    if n < 1:
        raise ConfigError(f"{kind} model needs n >= 1, got {n}")
    if n > MAX_MODEL_N:
        raise ConfigError(f"{kind} model enumeration is limited to n <= {MAX_MODEL_N}, got {n}")


# --- randomized response family ------------------------------------------


def _sample_lrr(spec: MechanismSpec, d: Dataset, rng: np.random.Generator) -> Output:
    _check_domain(d, (-1, 1), spec.kind)
    p = logistic(spec.param("eps"))
    keep = rng.random(len(d)) < p
    return tuple(x if k else -x for x, k in zip(d, keep))


def _model_lrr(spec: MechanismSpec, n: int) -> MechanismModel:
    _guard_model_n(spec.kind, n)
    p = logistic(spec.param("eps"))
    alphabet = list(itertools.product((-1, 1), repeat=n))

    def prob(o: Output, d: Dataset) -> float:
        matches = sum(a == b for a, b in zip(o, d))
        return p ** matches * (1.0 - p) ** (len(d) - matches)

    return MechanismModel(alphabet, prob)


# --- gap toys --------------------------------------------------------------


def _sample_nas(spec: MechanismSpec, d: Dataset, rng: np.random.Generator) -> Output:
    i = int(rng.integers(len(d)))
    return (i, d[i])


def _model_nas(spec: MechanismSpec, n: int) -> MechanismModel:
    _guard_model_n(spec.kind, n)
    alphabet = [(i, x) for i in range(n) for x in (0, 1)]

    def prob(o: Output, d: Dataset) -> float:
        i, x = o
        return (1.0 / len(d)) if d[i] == x else 0.0

    return MechanismModel(alphabet, prob)


def _sample_aon(spec: MechanismSpec, d: Dataset, rng: np.random.Generator) -> Output:
    return tuple(d) if rng.random() < spec.param("p") else NULL


def _model_aon(spec: MechanismSpec, n: int) -> MechanismModel:
    _guard_model_n(spec.kind, n)
    p = spec.param("p")
    alphabet: list[Output] = [NULL]
    alphabet += list(itertools.product((0, 1), repeat=n))

    def prob(o: Output, d: Dataset) -> float:
        if o == NULL:
            return 1.0 - p
        return p if o == d else 0.0

    return MechanismModel(alphabet, prob)


def _parity(d: Dataset) -> int:
    return int(sum(d) % 2)


def _sample_xor(spec: MechanismSpec, d: Dataset, rng: np.random.Generator) -> Output:
    _check_domain(d, (0, 1), spec.kind)
    return _parity(d)


def _model_xor(spec: MechanismSpec, n: int) -> MechanismModel:
    _guard_model_n(spec.kind, n)
    return _one_hot_model((0, 1), _parity)


def _xip(d: Dataset) -> Output:
    return tuple(d[i] ^ d[i + 1] for i in range(0, len(d), 2))


def _sample_xip(spec: MechanismSpec, d: Dataset, rng: np.random.Generator) -> Output:
    _check_domain(d, (0, 1), spec.kind)
    if len(d) % 2:
        raise ConfigError(f"xip needs an even dataset length, got {len(d)}")
    return _xip(d)


def _model_xip(spec: MechanismSpec, n: int) -> MechanismModel:
    _guard_model_n(spec.kind, n)
    if n % 2:
        raise ConfigError(f"xip needs even n, got {n}")
    alphabet = list(itertools.product((0, 1), repeat=n // 2))
    return _one_hot_model(alphabet, _xip)


def _sample_xrr(spec: MechanismSpec, d: Dataset, rng: np.random.Generator) -> Output:
    _check_domain(d, (0, 1), spec.kind)
    keep = rng.random() < logistic(spec.param("eps"))
    par = _parity(d)
    return par if keep else 1 - par


def _model_xrr(spec: MechanismSpec, n: int) -> MechanismModel:
    _guard_model_n(spec.kind, n)
    p = logistic(spec.param("eps"))

    def prob(o: Output, d: Dataset) -> float:
        return p if o == _parity(d) else 1.0 - p

    return MechanismModel((0, 1), prob)


# --- counting queries -------------------------------------------------------


def _sample_count(spec: MechanismSpec, d: Dataset, rng: np.random.Generator) -> Output:
    _check_domain(d, (0, 1), spec.kind)
    return int(sum(d))


def _model_count(spec: MechanismSpec, n: int) -> MechanismModel:
    _guard_model_n(spec.kind, n)
    return _one_hot_model(tuple(range(n + 1)), lambda d: int(sum(d)))


def cis_sets(n: int, s: int) -> list[range]:
    """Index ranges of the order-grouped sets; the final set may be smaller."""
    if s < 1:
        raise ConfigError(f"cis needs s >= 1, got {s}")
    return [range(i, min(i + s, n)) for i in range(0, n, s)]


def _cis_counts(d: Dataset, s: int) -> Output:
    return tuple(sum(d[i] for i in block) for block in cis_sets(len(d), s))


def _sample_cis(spec: MechanismSpec, d: Dataset, rng: np.random.Generator) -> Output:
    _check_domain(d, (0, 1), spec.kind)
    return _cis_counts(d, int(spec.param("s")))


def _model_cis(spec: MechanismSpec, n: int) -> MechanismModel:
    _guard_model_n(spec.kind, n)
    s = int(spec.param("s"))
    blocks = cis_sets(n, s)
    alphabet = list(itertools.product(*(range(len(b) + 1) for b in blocks)))
    return _one_hot_model(alphabet, lambda d: _cis_counts(d, s))


# --- Laplace noising ---------------------------------------------------------


def _sample_laplace(spec: MechanismSpec, d: Dataset, rng: np.random.Generator) -> Output:
    _check_domain(d, (-1, 1), spec.kind)
    eps = spec.param("eps")
    if not 0.0 < eps < math.inf:
        raise ConfigError(f"laplace needs finite eps > 0, got {eps}")
    # Scale b = 2/eps: sensitivity 2 on the {-1, +1} universe.
    return np.asarray(d, dtype=float) + rng.laplace(0.0, 2.0 / eps, len(d))


_REGISTRY: dict[str, _MechDef] = {
    "lrr": _MechDef(("eps",), (-1, 1), _sample_lrr, _model_lrr),
    "rr": _MechDef(("eps",), (-1, 1), _sample_lrr, _model_lrr),
    "nas": _MechDef((), (0, 1), _sample_nas, _model_nas),
    "aon": _MechDef(("p",), (0, 1), _sample_aon, _model_aon),
    "xor": _MechDef((), (0, 1), _sample_xor, _model_xor),
    "xip": _MechDef((), (0, 1), _sample_xip, _model_xip),
    "xrr": _MechDef(("eps",), (0, 1), _sample_xrr, _model_xrr),
    "count": _MechDef((), (0, 1), _sample_count, _model_count),
    "cis": _MechDef(("s",), (0, 1), _sample_cis, _model_cis),
    "laplace": _MechDef(("eps",), (-1, 1), _sample_laplace, None),
}


def universe(spec: MechanismSpec) -> tuple[Any, ...]:
    """The binary universe the mechanism operates on."""
    return _REGISTRY[spec.kind].universe


def default_pairs(spec: MechanismSpec, n: int) -> PairVector:
    """The canonical pair vector over the mechanism's universe."""
    x, y = universe(spec)
    return PairVector(((x, y),) * n)


def sample(spec: MechanismSpec, dataset: Sequence[Any], rng: np.random.Generator) -> Output:
    """One draw from the mechanism on ``dataset``; deterministic given ``rng``."""
    if len(dataset) < 1:
        raise ConfigError("dataset must have at least one element")
    return _REGISTRY[spec.kind].sample(spec, tuple(dataset), rng)


def sampler(spec: MechanismSpec) -> Callable[[Sequence[Any], np.random.Generator], Output]:
    """The mechanism as a plain ``(dataset, rng) -> output`` callable."""
    return lambda dataset, rng: sample(spec, dataset, rng)


def model(spec: MechanismSpec, n: int) -> MechanismModel:
    """Exact conditional output distribution for ``n``-element datasets.

    Raises ``UnsupportedModelError`` for continuous mechanisms (Laplace
    noising is handled analytically by the loss module instead).
    """
    builder = _REGISTRY[spec.kind].model
    if builder is None:
        raise UnsupportedModelError(f"{spec.kind} has no enumerable output distribution")
    return builder(spec, n)
