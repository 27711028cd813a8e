"""Sparse labstates over a Heisenberg net at one time tick."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from . import basis
from .basis import SignalSet
from .errors import DomainError, NormalizationError

PRUNE_THRESHOLD = 1e-15
NORM_TOLERANCE = 1e-10


@dataclass(frozen=True)
class Labstate:
    """Pure labstate ``sum_i psi^i |i, n)`` stored as a sparse map.

    ``amplitudes`` holds only entries with ``|psi^i| > PRUNE_THRESHOLD``,
    keyed by basis index in ascending order. ``normalized`` records whether
    the state was checked to have unit norm; operators such as
    :func:`lift_signal_creation` produce unnormalized states.
    """

    time: int
    rank: int
    amplitudes: Mapping[int, complex]
    normalized: bool = True

    def __post_init__(self):
        basis.check_rank(self.rank)
        d = 1 << self.rank
        for idx in self.amplitudes:
            if not 0 <= idx < d:
                raise DomainError(f"basis index {idx} out of range for rank {self.rank}")
        ordered = {i: complex(self.amplitudes[i]) for i in sorted(self.amplitudes)}
        object.__setattr__(self, "amplitudes", MappingProxyType(ordered))

    @property
    def dimension(self) -> int:
        return 1 << self.rank

    def norm2(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes.values())

    def amplitude(self, index: int) -> complex:
        basis.check_index(index, self.rank)
        return self.amplitudes.get(index, 0j)

    def to_dense(self) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=complex)
        for i, a in self.amplitudes.items():
            vec[i] = a
        return vec

    def is_zero(self) -> bool:
        return not self.amplitudes

    def __eq__(self, other):
        if not isinstance(other, Labstate):
            return NotImplemented
        return (self.time, self.rank, dict(self.amplitudes)) == (
            other.time,
            other.rank,
            dict(other.amplitudes),
        )

    def __hash__(self):
        return hash((self.time, self.rank, tuple(self.amplitudes.items())))


@dataclass(frozen=True)
class OutcomeRow:
    index: int
    signals: SignalSet
    probability: float


@dataclass(frozen=True)
class OutcomeTable:
    rows: tuple[OutcomeRow, ...]
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(sorted(self.rows, key=lambda r: r.index)))
        object.__setattr__(self, "total", sum(r.probability for r in self.rows))

    def as_pairs(self) -> list[tuple[SignalSet, float]]:
        return [(r.signals, r.probability) for r in self.rows]


def _prune(entries: Iterable[tuple[int, complex]]) -> dict[int, complex]:
    return {i: complex(a) for i, a in entries if abs(a) > PRUNE_THRESHOLD}


def _require_normalized(n2: float, tolerance: float, what: str) -> None:
    deficit = 1.0 - n2
    if abs(deficit) > tolerance:
        raise NormalizationError(
            f"{what} is not normalized: norm^2 = {n2:.15g} (deficit {deficit:.3e})", deficit
        )


def from_entries(
    entries: Mapping[int, complex] | Iterable[tuple[int, complex]],
    rank: int,
    time: int = 0,
    *,
    normalized: bool = False,
) -> Labstate:
    """Build a labstate without a normalization check (``normalized`` is trusted)."""
    items = entries.items() if isinstance(entries, Mapping) else entries
    return Labstate(time, rank, _prune(items), normalized)


def from_dense(vec: np.ndarray, rank: int, time: int = 0, *, tolerance: float | None = None) -> Labstate:
    """Sparse labstate from a dense vector; marked normalized iff its norm is 1 within ``tolerance``."""
    vec = np.asarray(vec, dtype=complex)
    if vec.shape != (1 << rank,):
        raise DomainError(f"dense vector has shape {vec.shape}, expected ({1 << rank},)")
    tol = NORM_TOLERANCE if tolerance is None else tolerance
    entries = _prune((int(i), vec[i]) for i in np.flatnonzero(vec))
    n2 = sum(abs(a) ** 2 for a in entries.values())
    return Labstate(time, rank, entries, abs(n2 - 1.0) <= tol)


def void_state(rank: int, time: int = 0) -> Labstate:
    return Labstate(time, rank, {0: 1 + 0j})


def one_signal_state(
    coeffs: Sequence[complex], rank: int, time: int = 0, *, tolerance: float = NORM_TOLERANCE
) -> Labstate:
    """``sum_i coeffs[i-1] A+_i |0, n)``."""
    basis.check_rank(rank)
    if len(coeffs) != rank:
        raise DomainError(f"expected {rank} one-signal coefficients, got {len(coeffs)}")
    entries = _prune((1 << k, c) for k, c in enumerate(coeffs))
    _require_normalized(sum(abs(c) ** 2 for c in coeffs), tolerance, "one-signal labstate")
    return Labstate(time, rank, entries)


def general_state(
    entries: Mapping[int, complex], rank: int, time: int = 0, *, tolerance: float = NORM_TOLERANCE
) -> Labstate:
    basis.check_rank(rank)
    for idx in entries:
        basis.check_index(idx, rank)
    _require_normalized(sum(abs(a) ** 2 for a in entries.values()), tolerance, "labstate")
    return Labstate(time, rank, _prune(entries.items()))


def _check_same_rank(state: Labstate, index: int) -> None:
    if not 0 <= index < state.dimension:
        raise DomainError(f"basis index {index} does not belong to a rank-{state.rank} net")


def born_probability(state: Labstate, index: int) -> float:
    _check_same_rank(state, index)
    return abs(state.amplitudes.get(index, 0j)) ** 2


def outcome_table(state: Labstate, *, tolerance: float = NORM_TOLERANCE) -> OutcomeTable:
    rows = tuple(
        OutcomeRow(i, basis.signal_set_of(i), abs(a) ** 2) for i, a in state.amplitudes.items()
    )
    table = OutcomeTable(rows)
    _require_normalized(table.total, tolerance, "labstate")
    return table


def class_probability(state: Labstate, k: int) -> float:
    basis.class_size(state.rank, k)
    return sum(abs(a) ** 2 for i, a in state.amplitudes.items() if basis.signal_class(i) == k)


def lift_signal_creation(state: Labstate, i: int) -> Labstate:
    """Apply ``A+_i`` linearly; annihilated terms drop out and the result is flagged unnormalized."""
    if not 1 <= i <= state.rank:
        raise DomainError(f"qubit {i} out of range [1, {state.rank}]")
    out = {}
    for idx, a in state.amplitudes.items():
        image = basis.apply_signal_creation(idx, i, state.rank)
        if image is not basis.ANNIHILATED:
            out[image] = a
    return Labstate(state.time, state.rank, out, normalized=False)


def lift_signal_annihilation(state: Labstate, i: int) -> Labstate:
    if not 1 <= i <= state.rank:
        raise DomainError(f"qubit {i} out of range [1, {state.rank}]")
    out = {}
    for idx, a in state.amplitudes.items():
        image = basis.apply_signal_annihilation(idx, i, state.rank)
        if image is not basis.ANNIHILATED:
            out[image] = a
    return Labstate(state.time, state.rank, out, normalized=False)
