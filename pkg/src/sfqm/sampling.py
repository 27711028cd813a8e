"""Reproducible outcome sampling from a final outcome table.

The generator is a 64-bit linear congruential scheme with Knuth's MMIX
constants::

    state <- (6364136223846793005 * state + 1442695040888963407) mod 2**64
    u      = (state >> 11) / 2**53            # uniform in [0, 1)

seeded with ``state = seed mod 2**64`` and advanced once before every
draw. Each draw picks the first row (in ascending basis-index order) whose
cumulative probability exceeds ``u * total``. Any implementation following these
three lines reproduces the same samples.
"""

from __future__ import annotations

from .basis import SignalSet
from .errors import DomainError, NormalizationError
from .labstate import NORM_TOLERANCE, OutcomeTable

LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK = (1 << 64) - 1


class PortableLCG:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (LCG_MULTIPLIER * self.state + LCG_INCREMENT) & _MASK
        return self.state

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def sample_outcomes(
    table: OutcomeTable, count: int, seed: int, *, tolerance: float = NORM_TOLERANCE
) -> list[SignalSet]:
    """``count`` independent Born-rule draws from ``table``, in draw order."""
    if count < 0:
        raise DomainError(f"sample count must be non-negative, got {count}")
    if abs(table.total - 1.0) > tolerance:
        raise NormalizationError(f"outcome table total is {table.total:.15g}", 1.0 - table.total)
    rows = table.rows
    cumulative = []
    acc = 0.0
    for r in rows:
        acc += r.probability
        cumulative.append(acc)
    gen = PortableLCG(seed)
    draws = []
    for _ in range(count):
        u = gen.random() * acc
        for r, c in zip(rows, cumulative):
            if u < c:
                draws.append(r.signals)
                break
        else:
            draws.append(rows[-1].signals)
    return draws
