"""Multi-stage amplitudes: iterated evaluation and the explicit sum over paths.

The iterated evaluator folds :func:`sfqm.evolution.apply` over the chain
and is the production path. :func:`amplitude_by_paths` enumerates every
sequence of intermediate basis indices and is kept as an independent
oracle; it is exponential in the number of stages and guarded by a budget.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import prod

from .errors import DomainError, PathBudgetError
from .evolution import SemiUnitary, apply
from .labstate import NORM_TOLERANCE, Labstate, from_dense

DEFAULT_PATH_BUDGET = 10**7


@dataclass(frozen=True)
class StageChain:
    """Contiguous stages ``U_{M+1,M}, ..., U_{N,N-1}`` applied left to right.

    Ranks must be non-decreasing across every stage except reverse stages.
    An empty chain needs ``rank`` and ``time`` to describe the net it acts on.
    """

    stages: tuple[SemiUnitary, ...]
    initial_time: int
    initial_rank: int

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        t, r = self.initial_time, self.initial_rank
        for k, s in enumerate(self.stages, 1):
            if s.source_time != t:
                raise DomainError(f"stage {k} starts at time {s.source_time}, expected {t}")
            if s.source_rank != r:
                raise DomainError(f"stage {k} expects rank {s.source_rank}, chain supplies {r}")
            if s.target_rank < s.source_rank and not s.reverse:
                raise DomainError(
                    f"stage {k} lowers the rank {s.source_rank} -> {s.target_rank} "
                    "without being a reverse stage"
                )
            t, r = s.target_time, s.target_rank

    @classmethod
    def of(cls, stages: Sequence[SemiUnitary], *, time: int | None = None, rank: int | None = None):
        if stages:
            return cls(tuple(stages), stages[0].source_time, stages[0].source_rank)
        if time is None or rank is None:
            raise DomainError("an empty chain needs an explicit time and rank")
        return cls((), time, rank)

    @property
    def final_time(self) -> int:
        return self.stages[-1].target_time if self.stages else self.initial_time

    @property
    def final_rank(self) -> int:
        return self.stages[-1].target_rank if self.stages else self.initial_rank

    def dims(self) -> list[int]:
        """Register dimension at each tick, initial through final."""
        return [1 << self.initial_rank] + [s.target_dim for s in self.stages]

    def __len__(self):
        return len(self.stages)


def _check_initial(chain: StageChain, initial: Labstate) -> None:
    if initial.rank != chain.initial_rank or initial.time != chain.initial_time:
        raise DomainError(
            f"initial labstate (rank {initial.rank}, time {initial.time}) does not match "
            f"chain start (rank {chain.initial_rank}, time {chain.initial_time})"
        )


def evolve_chain(chain: StageChain, initial: Labstate) -> Labstate:
    _check_initial(chain, initial)
    state = initial
    for stage in chain.stages:
        state = apply(stage, state)
    return state


def amplitude(j: int, chain: StageChain, initial: Labstate) -> complex:
    final = evolve_chain(chain, initial)
    return final.amplitude(j)


def path_count(chain: StageChain) -> int:
    """Number of index paths ``(i_M, ..., i_{N-1})`` summed for one final index."""
    return prod(chain.dims()[:-1])


def _path_sum(j: int, psi: list[complex], mats: list[list[list[complex]]], dims: list[int]) -> complex:
    if not mats:
        return psi[j]
    total = 0j
    last = mats[-1][j]
    for path in itertools.product(*(range(d) for d in dims[:-1])):
        amp = psi[path[0]]
        if amp == 0:
            continue
        for k in range(1, len(path)):
            amp *= mats[k - 1][path[k]][path[k - 1]]
        total += amp * last[path[-1]]
    return total


def _prepare(chain: StageChain, initial: Labstate, budget: int):
    _check_initial(chain, initial)
    n = path_count(chain)
    if n > budget:
        raise PathBudgetError(n, budget)
    psi = initial.to_dense().tolist()
    mats = [s.matrix.tolist() for s in chain.stages]
    return psi, mats, chain.dims()


def amplitude_by_paths(
    j: int, chain: StageChain, initial: Labstate, *, budget: int = DEFAULT_PATH_BUDGET
) -> complex:
    """``sum_{i_{N-1}} ... sum_{i_M} U^{j,i_{N-1}} ... U^{i_{M+1},i_M} psi^{i_M}``.

    Paths are visited in lexicographic order of ``(i_M, ..., i_{N-1})`` and
    each term is multiplied in chronological order. Paths starting on a zero
    initial amplitude contribute exactly zero and are skipped.
    """
    if not 0 <= j < (1 << chain.final_rank):
        raise DomainError(f"final index {j} out of range for rank {chain.final_rank}")
    psi, mats, dims = _prepare(chain, initial, budget)
    return _path_sum(j, psi, mats, dims)


def _path_sum_block(args) -> list[complex]:
    js, psi, mats, dims = args
    return [_path_sum(j, psi, mats, dims) for j in js]


def evolve_by_paths(
    chain: StageChain, initial: Labstate, *, budget: int = DEFAULT_PATH_BUDGET, workers: int = 1
) -> Labstate:
    """Final labstate with every amplitude computed by path enumeration.

    With ``workers > 1`` the final indices are split across processes; each
    index is still summed in the same fixed order, so results are identical.
    """
    psi, mats, dims = _prepare(chain, initial, budget)
    d_final = dims[-1]
    if workers <= 1:
        amps = [_path_sum(j, psi, mats, dims) for j in range(d_final)]
    else:
        blocks = [list(range(w, d_final, workers)) for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_path_sum_block, [(b, psi, mats, dims) for b in blocks]))
        amps = [0j] * d_final
        for block, vals in zip(blocks, results):
            for j, a in zip(block, vals):
                amps[j] = a
    return from_dense(amps, chain.final_rank, chain.final_time)


def conservation_check(chain: StageChain, initial: Labstate) -> float:
    """``|sum_j |A(j, N | psi, M)|^2 - 1|``, the total-probability drift over the chain."""
    final = evolve_chain(chain, initial)
    return abs(final.norm2() - 1.0)


def conserves(chain: StageChain, initial: Labstate, tolerance: float = NORM_TOLERANCE) -> bool:
    return conservation_check(chain, initial) <= tolerance
