"""Semi-unitary stage operators between Heisenberg nets.

A stage carries the labstate from the net at ``source_time`` (rank ``r``)
to the net at ``target_time`` (rank ``r' >= r``). Its dense matrix has
entry ``[j, i] = U^{j,i}``, the amplitude for basis state ``|i)`` to land on
``|j)``, and must satisfy ``U^H U = I``.

Reverse stages (conjugate transposes built by :func:`reverse_stage`) are the
one sanctioned exception: they may lower the rank, and are validated as
co-isometries (``U U^H = I``) instead.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import basis
from .errors import ClassCollisionError, DomainError, RankCapError, ValidationError
from .labstate import NORM_TOLERANCE, Labstate, from_dense

DEFAULT_TOLERANCE = 1e-10

# dense 2^r x 2^r matrices beyond this are not practical
STAGE_RANK_CAP = 12


@dataclass(frozen=True)
class ValidationReport:
    """Structural diagnostics for one stage matrix.

    ``max_semiunitarity_deviation`` is ``max |(U^H U - I)_ij|`` for forward
    stages and ``max |(U U^H - I)_ij|`` for reverse stages.
    ``void_image_deviation`` measures how far column 0 is from the target
    void vector; ``signal_leak_to_void`` is the largest ``|U^{0,i}|``, i >= 1.
    """

    max_semiunitarity_deviation: float
    is_schrodinger: bool
    void_image_deviation: float
    signal_leak_to_void: float
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def is_semiunitary(self) -> bool:
        return self.max_semiunitarity_deviation <= self.tolerance


@dataclass(frozen=True, eq=False)
class SemiUnitary:
    matrix: np.ndarray
    source_rank: int
    target_rank: int
    source_time: int
    target_time: int
    report: ValidationReport
    reverse: bool = False

    @property
    def source_dim(self) -> int:
        return 1 << self.source_rank

    @property
    def target_dim(self) -> int:
        return 1 << self.target_rank

    @property
    def tolerance(self) -> float:
        return self.report.tolerance

    def one_signal_block(self) -> np.ndarray:
        """``S[j-1, i-1] = U^{2^(j-1), 2^(i-1)}``: the one-signal to one-signal amplitudes."""
        rows = [1 << j for j in range(self.target_rank)]
        cols = [1 << i for i in range(self.source_rank)]
        return self.matrix[np.ix_(rows, cols)].copy()

    def __repr__(self):
        tag = "reverse " if self.reverse else ""
        return (
            f"<{tag}SemiUnitary rank {self.source_rank}->{self.target_rank} "
            f"t {self.source_time}->{self.target_time}>"
        )


def _frozen(matrix: np.ndarray) -> np.ndarray:
    m = np.array(matrix, dtype=complex, copy=True)
    m.setflags(write=False)
    return m


def _check_stage_rank(rank: int) -> None:
    basis.check_rank(rank)
    if rank > STAGE_RANK_CAP:
        raise RankCapError(f"dense stage of rank {rank} exceeds the stage rank cap {STAGE_RANK_CAP}")


def isometry_deviation(matrix: np.ndarray) -> float:
    m = np.asarray(matrix, dtype=complex)
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1]))))


def coisometry_deviation(matrix: np.ndarray) -> float:
    return isometry_deviation(np.asarray(matrix).conj().T)


def validation_report(
    matrix: np.ndarray, *, tolerance: float = DEFAULT_TOLERANCE, reverse: bool = False
) -> ValidationReport:
    m = np.asarray(matrix, dtype=complex)
    dev = coisometry_deviation(m) if reverse else isometry_deviation(m)
    void = np.zeros(m.shape[0], dtype=complex)
    void[0] = 1.0
    void_dev = float(np.max(np.abs(m[:, 0] - void)))
    leak = float(np.max(np.abs(m[0, 1:]))) if m.shape[1] > 1 else 0.0
    return ValidationReport(
        max_semiunitarity_deviation=dev,
        is_schrodinger=void_dev <= tolerance and leak <= tolerance,
        void_image_deviation=void_dev,
        signal_leak_to_void=leak,
        tolerance=tolerance,
    )


def make_stage(
    matrix,
    source_rank: int,
    target_rank: int,
    source_time: int = 0,
    target_time: Optional[int] = None,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
) -> SemiUnitary:
    """Validate ``matrix`` as a semi-unitary stage and wrap it.

    Raises :class:`ValidationError` carrying the deviation when
    ``max |(U^H U - I)_ij| > tolerance``.
    """
    _check_stage_rank(source_rank)
    _check_stage_rank(target_rank)
    m = np.asarray(matrix, dtype=complex)
    expected = (1 << target_rank, 1 << source_rank)
    if m.shape != expected:
        raise DomainError(f"stage matrix has shape {m.shape}, expected {expected}")
    if target_rank < source_rank:
        raise DomainError(
            f"forward stage cannot lower the rank ({source_rank} -> {target_rank}); "
            "use reverse_stage for time-reversal experiments"
        )
    report = validation_report(m, tolerance=tolerance)
    if not report.is_semiunitary:
        raise ValidationError(
            f"matrix is not semi-unitary: max |(U^H U - I)_ij| = "
            f"{report.max_semiunitarity_deviation:.3e} > {tolerance:.1e}",
            report.max_semiunitarity_deviation,
        )
    if target_time is None:
        target_time = source_time + 1
    if target_time <= source_time:
        raise DomainError(f"target time {target_time} must follow source time {source_time}")
    return SemiUnitary(_frozen(m), source_rank, target_rank, source_time, target_time, report)


def identity_stage(rank: int, source_time: int = 0) -> SemiUnitary:
    return make_stage(np.eye(1 << rank), rank, rank, source_time)


def check_schrodinger(stage: SemiUnitary, tolerance: Optional[float] = None) -> ValidationReport:
    """Check that void maps to void and no signal state leaks into the void.

    Void preserved only up to a phase is *not* accepted: column 0 must equal
    the target void vector itself.
    """
    tol = stage.tolerance if tolerance is None else tolerance
    return validation_report(stage.matrix, tolerance=tol, reverse=stage.reverse)


def _check_source(stage: SemiUnitary, state: Labstate) -> None:
    if state.rank != stage.source_rank:
        raise DomainError(f"labstate rank {state.rank} != stage source rank {stage.source_rank}")
    if state.time != stage.source_time:
        raise DomainError(f"labstate time {state.time} != stage source time {stage.source_time}")


def apply(stage: SemiUnitary, state: Labstate, *, tolerance: float = NORM_TOLERANCE) -> Labstate:
    """``|psi, n) -> U |psi, n)``.

    Each target amplitude is accumulated over source indices in ascending
    order, so the result does not depend on how the work is split.
    """
    _check_source(stage, state)
    out = np.zeros(stage.target_dim, dtype=complex)
    for i, a in state.amplitudes.items():
        out += stage.matrix[:, i] * a
    result = from_dense(out, stage.target_rank, stage.target_time, tolerance=tolerance)
    if not state.normalized and result.normalized:
        result = Labstate(result.time, result.rank, result.amplitudes, normalized=False)
    return result


def compose(later: SemiUnitary, earlier: SemiUnitary, *, tolerance: Optional[float] = None) -> SemiUnitary:
    """The single stage equivalent to ``earlier`` followed by ``later``."""
    if earlier.target_rank != later.source_rank:
        raise DomainError(f"rank mismatch: {earlier.target_rank} feeds {later.source_rank}")
    if earlier.target_time != later.source_time:
        raise DomainError(f"time mismatch: {earlier.target_time} feeds {later.source_time}")
    tol = max(later.tolerance, earlier.tolerance) if tolerance is None else tolerance
    m = later.matrix @ earlier.matrix
    report = validation_report(m, tolerance=tol)
    reverse = False
    if not report.is_semiunitary and (later.reverse or earlier.reverse):
        co = validation_report(m, tolerance=tol, reverse=True)
        if co.is_semiunitary:
            report, reverse = co, True
    if not report.is_semiunitary:
        raise ValidationError(
            f"composed stage lost semi-unitarity (deviation {report.max_semiunitarity_deviation:.3e})",
            report.max_semiunitarity_deviation,
        )
    return SemiUnitary(
        _frozen(m), earlier.source_rank, later.target_rank, earlier.source_time, later.target_time,
        report, reverse,
    )


def reverse_stage(stage: SemiUnitary, source_time: Optional[int] = None) -> SemiUnitary:
    """Time-reversed stage ``U'^{j,i} = (U^{i,j})*`` running from the target net back to the source net.

    By default it starts at ``stage.target_time``; pass ``source_time`` to
    place it elsewhere in a chain.
    """
    t0 = stage.target_time if source_time is None else source_time
    m = stage.matrix.conj().T
    reverse = not stage.reverse
    report = validation_report(m, tolerance=stage.tolerance, reverse=reverse)
    return SemiUnitary(_frozen(m), stage.target_rank, stage.source_rank, t0, t0 + 1, report, reverse)


def creation_matrix(i: int, rank: int) -> np.ndarray:
    """Dense ``A+_i`` on a rank-``rank`` net."""
    d = 1 << rank
    if not 1 <= i <= rank:
        raise DomainError(f"qubit {i} out of range [1, {rank}]")
    a = np.zeros((d, d), dtype=complex)
    bit = 1 << (i - 1)
    for x in range(d):
        if not x & bit:
            a[x | bit, x] = 1.0
    return a


def conjugate_signal_operator(stage: SemiUnitary, i: int) -> np.ndarray:
    """``U A+_i U^H`` as a dense operator on the target net."""
    if not check_schrodinger(stage).is_schrodinger:
        raise DomainError("signal-operator transitions are only defined for Schrodinger stages")
    a = creation_matrix(i, stage.source_rank)
    return stage.matrix @ a @ stage.matrix.conj().T


def _product_image(S: np.ndarray, signals: tuple[int, ...], target_rank: int) -> np.ndarray:
    """``{U A+_i1 U^H} ... {U A+_ik U^H} |0)`` with each factor ``sum_j S[j,i] A+_j``."""
    amps = {0: 1 + 0j}
    for i in signals:
        nxt: dict[int, complex] = {}
        for idx, a in amps.items():
            for j in range(target_rank):
                s = S[j, i - 1]
                if s == 0:
                    continue
                bit = 1 << j
                if idx & bit:
                    continue
                nxt[idx | bit] = nxt.get(idx | bit, 0j) + s * a
        amps = nxt
    vec = np.zeros(1 << target_rank, dtype=complex)
    for idx, a in amps.items():
        vec[idx] = a
    return vec


def _complete(placed: np.ndarray, candidate: int, d: int) -> np.ndarray:
    """Unit vector orthogonal to the columns of ``placed``, preferring basis vector ``candidate``."""
    row_weight = np.sum(np.abs(placed) ** 2, axis=1)
    residual2 = 1.0 - row_weight
    pick = candidate if residual2[candidate] >= 0.25 else int(np.argmax(residual2))
    v = np.zeros(d, dtype=complex)
    v[pick] = 1.0
    for _ in range(2):
        v = v - placed @ (placed.conj().T @ v)
    return v / np.linalg.norm(v)


def extend_one_signal(
    S,
    domain_classes: Iterable[int] = (0, 1),
    source_time: int = 0,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
) -> SemiUnitary:
    """Build a register stage from one-signal transitions ``A+_i -> sum_j S[j,i] A+_j``.

    ``S`` has shape ``(target_rank, source_rank)`` and must be an isometry.
    Columns for basis states in ``domain_classes`` follow the product rule,
    with void -> void; a multi-signal image whose norm collapses because two
    excitations meet on one detector raises :class:`ClassCollisionError`.
    Remaining columns use the product-rule image when it is already a unit
    vector orthogonal to what has been placed, and otherwise an orthonormal
    completion (preferring the unchanged basis state), so the result is
    always a full Schrodinger-form isometry.
    """
    S = np.asarray(S, dtype=complex)
    if S.ndim != 2:
        raise DomainError("one-signal block must be a 2-d matrix")
    target_rank, source_rank = S.shape
    _check_stage_rank(source_rank)
    _check_stage_rank(target_rank)
    dev = isometry_deviation(S)
    if dev > tolerance:
        raise ValidationError(f"one-signal block is not an isometry (deviation {dev:.3e})", dev)
    domain = set(domain_classes)
    bad = [k for k in domain if not 0 <= k <= source_rank]
    if bad:
        raise DomainError(f"domain classes {sorted(bad)} out of range [0, {source_rank}]")

    d_src, d_tgt = 1 << source_rank, 1 << target_rank
    m = np.zeros((d_tgt, d_src), dtype=complex)
    m[0, 0] = 1.0
    placed = [0]
    deferred = []
    for x in range(1, d_src):
        signals = basis.signal_set_of(x)
        if len(signals) not in domain:
            deferred.append(x)
            continue
        image = _product_image(S, signals, target_rank)
        norm = float(np.linalg.norm(image))
        if abs(norm - 1.0) > tolerance:
            raise ClassCollisionError(x, signals, norm)
        m[:, x] = image
        placed.append(x)

    dev = isometry_deviation(m[:, placed])
    if dev > tolerance:
        raise ValidationError(f"product-rule columns are not orthonormal (deviation {dev:.3e})", dev)

    for x in deferred:
        q = m[:, placed]
        image = _product_image(S, basis.signal_set_of(x), target_rank)
        overlap = np.max(np.abs(q.conj().T @ image))
        if abs(np.linalg.norm(image) - 1.0) <= tolerance and overlap <= tolerance:
            m[:, x] = image
        else:
            m[:, x] = _complete(q, x, d_tgt)
        placed.append(x)

    return make_stage(m, source_rank, target_rank, source_time, tolerance=tolerance)


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormalize ``cols`` random complex Gaussian columns of length ``rows``."""
    if cols > rows:
        raise DomainError(f"cannot fit {cols} orthonormal columns in dimension {rows}")
    z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_stage(
    source_rank: int,
    target_rank: int,
    rng: np.random.Generator,
    source_time: int = 0,
    *,
    schrodinger: bool = True,
) -> SemiUnitary:
    """Random stage; with ``schrodinger`` the void block is fixed and the rest is a random isometry."""
    d, dp = 1 << source_rank, 1 << target_rank
    if schrodinger:
        m = np.zeros((dp, d), dtype=complex)
        m[0, 0] = 1.0
        m[1:, 1:] = random_isometry(dp - 1, d - 1, rng)
    else:
        m = random_isometry(dp, d, rng)
    return make_stage(m, source_rank, target_rank, source_time)
