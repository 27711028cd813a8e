"""Preferred-basis bookkeeping for a Heisenberg net of ``rank`` qubits.

Index convention (the only one used in this package): qubit ``j`` is bit
``j - 1`` of the basis index, so qubit 1 is the least significant bit and
the occupation sequence ``(e1, e2, ..., er)`` maps to ``sum(e_j << (j - 1))``.

Basis indices are plain ints; signal sets are ascending tuples of 1-based
qubit numbers. Creation/annihilation on a single basis element return
``ANNIHILATED`` (``None``) when the element is sent to the zero vector.
"""

from __future__ import annotations

from collections.abc import Sequence
from math import comb
from typing import Final, Optional

from .errors import DomainError, RankCapError

MAX_RANK: Final = 30
DEFAULT_RANK_CAP: Final = 20

ANNIHILATED: Final = None

_rank_cap = DEFAULT_RANK_CAP

SignalSet = tuple[int, ...]


def rank_cap() -> int:
    return _rank_cap


def set_rank_cap(cap: int) -> int:
    """Set the process-wide rank cap and return the previous value."""
    global _rank_cap
    if not 1 <= cap <= MAX_RANK:
        raise DomainError(f"rank cap must lie in [1, {MAX_RANK}], got {cap}")
    previous, _rank_cap = _rank_cap, cap
    return previous


def check_rank(rank: int) -> int:
    if isinstance(rank, bool) or not isinstance(rank, int):
        raise DomainError(f"rank must be an int, got {rank!r}")
    if rank < 1:
        raise DomainError(f"rank must be positive, got {rank}")
    if rank > _rank_cap:
        raise RankCapError(f"rank {rank} exceeds the rank cap {_rank_cap}")
    return rank


def dimension(rank: int) -> int:
    return 1 << check_rank(rank)


def check_index(index: int, rank: int) -> int:
    if not 0 <= index < (1 << rank):
        raise DomainError(f"basis index {index} out of range for rank {rank}")
    return index


def _check_qubit(i: int, rank: int) -> None:
    if not 1 <= i <= rank:
        raise DomainError(f"qubit {i} out of range [1, {rank}]")


def computational_index(occupation: Sequence[int]) -> int:
    """Map an occupation sequence ``(e1, ..., er)`` to ``sum(e_j * 2**(j-1))``."""
    index = 0
    for j, bit in enumerate(occupation):
        if bit not in (0, 1):
            raise DomainError(f"occupation entries must be 0 or 1, got {bit!r} at qubit {j + 1}")
        index |= bit << j
    return index


def occupation_of(index: int, rank: int) -> tuple[int, ...]:
    check_index(index, rank)
    return tuple((index >> j) & 1 for j in range(rank))


def occupation_string(index: int, rank: int) -> str:
    """Occupation sequence as text, qubit 1 first (``5, 3 -> "101"``)."""
    return "".join(map(str, occupation_of(index, rank)))


def signal_set_of(index: int) -> SignalSet:
    """Qubits in the signal state, ascending; ``()`` is the void state."""
    if index < 0:
        raise DomainError(f"basis index must be non-negative, got {index}")
    out = []
    j = 1
    while index:
        if index & 1:
            out.append(j)
        index >>= 1
        j += 1
    return tuple(out)


def index_of_signals(signals: Sequence[int]) -> int:
    """Inverse of :func:`signal_set_of` (``sum(2**(j-1))``); duplicates are rejected."""
    index = 0
    for j in signals:
        if j < 1:
            raise DomainError(f"qubit numbers start at 1, got {j}")
        bit = 1 << (j - 1)
        if index & bit:
            raise DomainError(f"qubit {j} repeated in signal set")
        index |= bit
    return index


def signal_class(index: int) -> int:
    return bin(index).count("1")


def class_size(rank: int, k: int) -> int:
    if not 0 <= k <= rank:
        raise DomainError(f"signal class {k} out of range [0, {rank}]")
    return comb(rank, k)


def class_members(rank: int, k: int) -> list[int]:
    """All basis indices of signal class ``k``, ascending."""
    class_size(rank, k)
    return [x for x in range(1 << rank) if signal_class(x) == k]


def apply_signal_creation(index: int, i: int, rank: int) -> Optional[int]:
    _check_qubit(i, rank)
    check_index(index, rank)
    bit = 1 << (i - 1)
    if index & bit:
        return ANNIHILATED
    return index | bit


def apply_signal_annihilation(index: int, i: int, rank: int) -> Optional[int]:
    _check_qubit(i, rank)
    check_index(index, rank)
    bit = 1 << (i - 1)
    if not index & bit:
        return ANNIHILATED
    return index & ~bit
