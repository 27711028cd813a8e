"""Line-oriented experiment description language.

Example::

    experiment mz
    rank 2
    label 1 "upper arm"
    state 1 1,0                         # A+_1 |0)
    stage bs 1 2 0.7853981633974483 0
    stage bs 1 2 0.7853981633974483 0

Directives, one per line (``#`` starts a comment, tokens are separated by
whitespace, labels may be double-quoted with ``\\"``, ``\\\\``, ``\\n`` and
``\\r`` escapes)::

    experiment NAME                     # must come first, exactly once
    rank INT                            # initial rank (required)
    time INT                            # initial tick, default 0
    label INT STRING                    # inert detector description
    state (INT COMPLEX)+                # basis index / amplitude pairs (required)
    stage matrix TDIM SDIM              # followed by TDIM rows of SDIM COMPLEX
    stage bs I J THETA PHI              # beamsplitter between qubits I and J
    stage phase I PHI                   # phase shift on qubit I
    stage grow RANK (SRC: (TGT COMPLEX)+)+
    stage swap I J
    stage reverse K                     # time reversal of the K-th stage

``COMPLEX`` is ``re`` or ``re,im`` (no spaces around the comma); all
numerals are decimal and angles are in radians.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import basis
from .errors import DomainError, ParseError, ResourceError, SFQMError, ValidationError
from .evolution import (
    DEFAULT_TOLERANCE,
    SemiUnitary,
    ValidationReport,
    extend_one_signal,
    make_stage,
    reverse_stage,
)
from .labstate import NORM_TOLERANCE, Labstate, general_state
from .pathsum import StageChain

STAGE_KINDS = ("matrix", "bs", "phase", "grow", "swap", "reverse")

_INT = re.compile(r"[0-9]+", re.ASCII)
_SINT = re.compile(r"[+-]?[0-9]+", re.ASCII)
_FLOAT = re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?", re.ASCII)
_SRC = re.compile(r"([0-9]+):", re.ASCII)

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "r": "\r"}

_STAGE_ARITY = {"bs": 4, "phase": 2, "swap": 2, "reverse": 1}


@dataclass(frozen=True)
class StageSpec:
    """One ``stage`` directive.

    ``params`` per kind: ``matrix`` ``(tdim, sdim, rows)``; ``bs``
    ``(i, j, theta, phi)``; ``phase`` ``(i, phi)``; ``grow``
    ``(rank, ((src, ((tgt, c), ...)), ...))``; ``swap`` ``(i, j)``;
    ``reverse`` ``(k,)``. ``target_rank`` is set only where the directive
    declares it (``matrix``, ``grow``).
    """

    kind: str
    params: tuple
    target_rank: Optional[int] = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    initial_rank: int
    initial_state: tuple[tuple[int, complex], ...]
    stages: tuple[StageSpec, ...] = ()
    initial_time: int = 0
    labels: dict = field(default_factory=dict)
    state_line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class _Token:
    text: str
    column: int
    quoted: bool = False


def _tokenize(line: str, lineno: int) -> list[_Token]:
    tokens = []
    pos, n = 0, len(line)
    while pos < n:
        ch = line[pos]
        if ch.isspace():
            pos += 1
        elif ch == "#":
            break
        elif ch == '"':
            start, pos, buf = pos, pos + 1, []
            while True:
                if pos >= n:
                    raise ParseError("unterminated string", lineno, start + 1)
                c = line[pos]
                if c == "\\" and pos + 1 < n and line[pos + 1] in _ESCAPES:
                    buf.append(_ESCAPES[line[pos + 1]])
                    pos += 2
                elif c == '"':
                    pos += 1
                    break
                else:
                    buf.append(c)
                    pos += 1
            tokens.append(_Token("".join(buf), start + 1, True))
        else:
            start = pos
            while pos < n and not line[pos].isspace() and line[pos] not in '#"':
                pos += 1
            tokens.append(_Token(line[start:pos], start + 1))
    return tokens


def _int(tok: _Token, lineno: int, what: str, *, signed: bool = False) -> int:
    pattern = _SINT if signed else _INT
    if tok.quoted or not pattern.fullmatch(tok.text):
        raise ParseError(f"malformed integer for {what}: {tok.text!r}", lineno, tok.column)
    return int(tok.text)


def _float(text: str, tok: _Token, lineno: int, what: str) -> float:
    if tok.quoted or not _FLOAT.fullmatch(text):
        raise ParseError(f"malformed number for {what}: {tok.text!r}", lineno, tok.column)
    value = float(text)
    if not math.isfinite(value):
        raise ParseError(f"number out of range for {what}: {tok.text!r}", lineno, tok.column)
    return value


def _complex(tok: _Token, lineno: int) -> complex:
    parts = tok.text.split(",")
    if tok.quoted or len(parts) > 2:
        raise ParseError(f"malformed complex literal {tok.text!r}", lineno, tok.column)
    try:
        re_ = _float(parts[0], tok, lineno, "complex")
        im = _float(parts[1], tok, lineno, "complex") if len(parts) == 2 else 0.0
    except ParseError:
        raise ParseError(f"malformed complex literal {tok.text!r}", lineno, tok.column) from None
    return complex(re_, im)


def _arity(tokens: list[_Token], expected: int, lineno: int, what: str) -> None:
    if len(tokens) != expected:
        col = tokens[expected].column if len(tokens) > expected else (tokens[-1].column if tokens else 1)
        raise ParseError(f"{what} takes {expected - 1} argument(s), got {len(tokens) - 1}", lineno, col)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _parse_colmap(tokens: list[_Token], lineno: int) -> tuple:
    if len(tokens) == 1 and tokens[0].quoted:
        inner = _tokenize(tokens[0].text, lineno)
        tokens = [_Token(t.text, tokens[0].column + t.column, False) for t in inner]
    if not tokens:
        raise ParseError("grow needs at least one column mapping", lineno)
    colmap = []
    seen = set()
    k = 0
    while k < len(tokens):
        m = _SRC.fullmatch(tokens[k].text)
        if not m or tokens[k].quoted:
            raise ParseError(f"expected 'SRC:' in grow column map, got {tokens[k].text!r}", lineno, tokens[k].column)
        src = int(m.group(1))
        if src in seen:
            raise ParseError(f"source qubit {src} mapped twice", lineno, tokens[k].column)
        seen.add(src)
        k += 1
        terms = []
        while k < len(tokens) and not _SRC.fullmatch(tokens[k].text):
            if k + 1 >= len(tokens) or _SRC.fullmatch(tokens[k + 1].text):
                raise ParseError("grow column map entries come in TGT COMPLEX pairs", lineno, tokens[k].column)
            terms.append((_int(tokens[k], lineno, "target qubit"), _complex(tokens[k + 1], lineno)))
            k += 2
        if not terms:
            raise ParseError(f"source qubit {src} has an empty column", lineno, tokens[k - 1].column)
        colmap.append((src, tuple(terms)))
    return tuple(colmap)


def parse(text: Union[str, bytes]) -> ExperimentSpec:
    """Parse an experiment file. Every failure is a :class:`ParseError` with a 1-based location."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            head = bytes(text)[: exc.start]
            line = head.count(b"\n") + 1
            column = exc.start - (head.rfind(b"\n") + 1) + 1
            raise ParseError("input is not valid UTF-8", line, column) from None
    lines = text.split("\n")
    last_line = max(len(lines) - (text.endswith("\n")), 1)

    name = None
    rank = rank_line = None
    time = time_line = None
    labels: dict[int, str] = {}
    label_lines: dict[int, int] = {}
    state = state_line = None
    stages: list[StageSpec] = []

    k = 0
    while k < len(lines):
        lineno = k + 1
        tokens = _tokenize(lines[k].rstrip("\r"), lineno)
        k += 1
        if not tokens:
            continue
        head = tokens[0]
        directive = head.text if not head.quoted else None
        if name is None and directive != "experiment":
            raise ParseError("file must start with 'experiment NAME'", lineno, head.column)
        if directive == "experiment":
            if name is not None:
                raise ParseError("duplicate experiment header", lineno, head.column)
            _arity(tokens, 2, lineno, "experiment")
            if tokens[1].quoted:
                raise ParseError("experiment name must be a bare word", lineno, tokens[1].column)
            name = tokens[1].text
        elif directive == "rank":
            if rank is not None:
                raise ParseError("duplicate rank directive", lineno, head.column)
            _arity(tokens, 2, lineno, "rank")
            rank = _int(tokens[1], lineno, "rank")
            if rank < 1:
                raise ParseError("rank must be at least 1", lineno, tokens[1].column)
            rank_line = lineno
        elif directive == "time":
            if time is not None:
                raise ParseError("duplicate time directive", lineno, head.column)
            _arity(tokens, 2, lineno, "time")
            time = _int(tokens[1], lineno, "time", signed=True)
            time_line = lineno
        elif directive == "label":
            _arity(tokens, 3, lineno, "label")
            q = _int(tokens[1], lineno, "label qubit")
            if q < 1:
                raise ParseError("qubit numbers start at 1", lineno, tokens[1].column)
            if q in labels:
                raise ParseError(f"duplicate label for qubit {q}", lineno, tokens[1].column)
            labels[q] = tokens[2].text
            label_lines[q] = lineno
        elif directive == "state":
            if state is not None:
                raise ParseError("duplicate state directive", lineno, head.column)
            args = tokens[1:]
            if not args or len(args) % 2:
                col = args[-1].column if args else head.column
                raise ParseError("state takes one or more INDEX COMPLEX pairs", lineno, col)
            entries = []
            seen = set()
            for a in range(0, len(args), 2):
                idx = _int(args[a], lineno, "basis index")
                if idx in seen:
                    raise ParseError(f"basis index {idx} repeated in state", lineno, args[a].column)
                seen.add(idx)
                entries.append((idx, _complex(args[a + 1], lineno)))
            state, state_line = tuple(entries), lineno
        elif directive == "stage":
            if len(tokens) < 2:
                raise ParseError("stage needs a kind", lineno, head.column)
            kind_tok = tokens[1]
            kind = kind_tok.text
            if kind_tok.quoted or kind not in STAGE_KINDS:
                raise ParseError(f"unknown stage kind {kind!r}", lineno, kind_tok.column)
            args = tokens[2:]
            if kind == "matrix":
                _arity(tokens[1:], 3, lineno, "stage matrix")
                tdim = _int(args[0], lineno, "target dimension")
                sdim = _int(args[1], lineno, "source dimension")
                for tok, d in ((args[0], tdim), (args[1], sdim)):
                    if not _is_power_of_two(d):
                        raise ParseError(f"matrix dimension {d} is not a power of two", lineno, tok.column)
                rows = []
                while len(rows) < tdim:
                    if k >= len(lines):
                        raise ParseError(
                            f"matrix stage expects {tdim} rows, found {len(rows)}", last_line, 1
                        )
                    row_no = k + 1
                    row_tokens = _tokenize(lines[k].rstrip("\r"), row_no)
                    k += 1
                    if not row_tokens:
                        continue
                    if len(row_tokens) != sdim:
                        col = row_tokens[sdim].column if len(row_tokens) > sdim else row_tokens[-1].column
                        raise ParseError(f"matrix row needs {sdim} entries, got {len(row_tokens)}", row_no, col)
                    rows.append(tuple(_complex(t, row_no) for t in row_tokens))
                stages.append(StageSpec("matrix", (tdim, sdim, tuple(rows)), tdim.bit_length() - 1, lineno))
            elif kind == "grow":
                if not args:
                    raise ParseError("stage grow takes a rank and a column map", lineno, kind_tok.column)
                new_rank = _int(args[0], lineno, "rank")
                if new_rank < 1:
                    raise ParseError("rank must be at least 1", lineno, args[0].column)
                colmap = _parse_colmap(args[1:], lineno)
                stages.append(StageSpec("grow", (new_rank, colmap), new_rank, lineno))
            else:
                _arity(tokens[1:], _STAGE_ARITY[kind] + 1, lineno, f"stage {kind}")
                if kind == "bs":
                    params = (
                        _int(args[0], lineno, "qubit"),
                        _int(args[1], lineno, "qubit"),
                        _float(args[2].text, args[2], lineno, "theta"),
                        _float(args[3].text, args[3], lineno, "phi"),
                    )
                elif kind == "phase":
                    params = (_int(args[0], lineno, "qubit"), _float(args[1].text, args[1], lineno, "phi"))
                elif kind == "swap":
                    params = (_int(args[0], lineno, "qubit"), _int(args[1], lineno, "qubit"))
                else:
                    ref = _int(args[0], lineno, "stage number")
                    if not 1 <= ref <= len(stages):
                        raise ParseError(
                            f"reverse refers to stage {ref}, but only {len(stages)} precede it",
                            lineno,
                            args[0].column,
                        )
                    params = (ref,)
                stages.append(StageSpec(kind, params, None, lineno))
        else:
            raise ParseError(f"unknown directive {head.text!r}", lineno, head.column)

    end = last_line
    if name is None:
        raise ParseError("missing experiment header", 1)
    if rank is None:
        raise ParseError("missing rank", end)
    if state is None:
        raise ParseError("missing initial state", end)
    for idx, _ in state:
        if idx.bit_length() > rank:
            raise ParseError(f"basis index {idx} out of range for rank {rank}", state_line)
    max_rank = max([rank] + [s.target_rank for s in stages if s.target_rank is not None])
    for q, text in labels.items():
        if q > max_rank:
            raise ParseError(f"label qubit {q} exceeds every rank in the experiment", label_lines[q])
    return ExperimentSpec(
        name=name,
        initial_rank=rank,
        initial_state=state,
        stages=tuple(stages),
        initial_time=time or 0,
        labels=labels,
        state_line=state_line,
    )


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_complex(c: complex) -> str:
    return f"{_fmt_float(c.real)},{_fmt_float(c.imag)}"


def _quote(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\r", "\\r")
    return '"' + escaped + '"'


def serialize(spec: ExperimentSpec) -> str:
    """Render ``spec`` so that ``parse(serialize(spec)) == spec``."""
    out = [f"experiment {spec.name}", f"rank {spec.initial_rank}", f"time {spec.initial_time}"]
    for q in sorted(spec.labels):
        out.append(f"label {q} {_quote(spec.labels[q])}")
    out.append("state " + " ".join(f"{i} {_fmt_complex(c)}" for i, c in spec.initial_state))
    for st in spec.stages:
        p = st.params
        if st.kind == "matrix":
            out.append(f"stage matrix {p[0]} {p[1]}")
            out.extend(" ".join(_fmt_complex(c) for c in row) for row in p[2])
        elif st.kind == "bs":
            out.append(f"stage bs {p[0]} {p[1]} {_fmt_float(p[2])} {_fmt_float(p[3])}")
        elif st.kind == "phase":
            out.append(f"stage phase {p[0]} {_fmt_float(p[1])}")
        elif st.kind == "grow":
            cols = " ".join(
                f"{src}: " + " ".join(f"{t} {_fmt_complex(c)}" for t, c in terms) for src, terms in p[1]
            )
            out.append(f"stage grow {p[0]} {cols}")
        else:
            out.append(f"stage {st.kind} " + " ".join(str(v) for v in p))
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# elaboration


def beamsplitter_block(rank: int, i: int, j: int, theta: float, phi: float) -> np.ndarray:
    """One-signal block of ``bs(i, j, theta, phi)``; identity on the other qubits."""
    s = np.eye(rank, dtype=complex)
    c, sn = math.cos(theta), math.sin(theta)
    s[i - 1, i - 1] = c
    s[j - 1, j - 1] = c
    s[i - 1, j - 1] = 1j * cmath.exp(1j * phi) * sn
    s[j - 1, i - 1] = 1j * cmath.exp(-1j * phi) * sn
    return s


def _check_qubits(rank: int, *qubits: int) -> None:
    for q in qubits:
        if not 1 <= q <= rank:
            raise DomainError(f"qubit {q} out of range [1, {rank}]")


def _grow_block(rank: int, new_rank: int, colmap: tuple) -> np.ndarray:
    if new_rank < rank:
        raise DomainError(f"grow cannot lower the rank ({rank} -> {new_rank})")
    s = np.zeros((new_rank, rank), dtype=complex)
    for i in range(min(rank, new_rank)):
        s[i, i] = 1.0
    for src, terms in colmap:
        _check_qubits(rank, src)
        col = np.zeros(new_rank, dtype=complex)
        for tgt, c in terms:
            _check_qubits(new_rank, tgt)
            col[tgt - 1] += c
        norm = np.linalg.norm(col)
        if norm == 0:
            raise DomainError(f"grow column for source qubit {src} is zero")
        s[:, src - 1] = col / norm
    return s


def _build_stage(
    st: StageSpec, rank: int, time: int, built: list[Optional[SemiUnitary]], tolerance: float
) -> SemiUnitary:
    p = st.params
    if st.kind == "matrix":
        tdim, sdim, rows = p
        if sdim != 1 << rank:
            raise DomainError(f"matrix source dimension {sdim} does not match rank {rank} (dimension {1 << rank})")
        return make_stage(np.array(rows, dtype=complex), rank, st.target_rank, time, tolerance=tolerance)
    if st.kind == "bs":
        i, j, theta, phi = p
        _check_qubits(rank, i, j)
        if i == j:
            raise DomainError("beamsplitter needs two distinct qubits")
        return extend_one_signal(beamsplitter_block(rank, i, j, theta, phi), (0, 1), time, tolerance=tolerance)
    if st.kind == "phase":
        i, phi = p
        _check_qubits(rank, i)
        s = np.eye(rank, dtype=complex)
        s[i - 1, i - 1] = cmath.exp(1j * phi)
        return extend_one_signal(s, (0, 1), time, tolerance=tolerance)
    if st.kind == "grow":
        basis.check_rank(p[0])
        return extend_one_signal(_grow_block(rank, p[0], p[1]), (0, 1), time, tolerance=tolerance)
    if st.kind == "swap":
        i, j = p
        _check_qubits(rank, i, j)
        perm = list(range(rank))
        perm[i - 1], perm[j - 1] = perm[j - 1], perm[i - 1]
        s = np.eye(rank, dtype=complex)[:, perm]
        return extend_one_signal(s, range(rank + 1), time, tolerance=tolerance)
    if st.kind == "reverse":
        (ref,) = p
        target = built[ref - 1]
        if target is None:
            raise ValidationError(f"reverse refers to stage {ref}, which failed validation")
        if target.target_rank != rank:
            raise DomainError(f"reverse of stage {ref} needs rank {target.target_rank}, current rank is {rank}")
        return reverse_stage(target, source_time=time)
    raise DomainError(f"unknown stage kind {st.kind!r}")


def _annotate(exc: SFQMError, st: StageSpec, number: int) -> SFQMError:
    exc.line = st.line
    exc.stage = number
    return exc


def elaborate(spec: ExperimentSpec, *, tolerance: float = DEFAULT_TOLERANCE) -> tuple[StageChain, Labstate]:
    """Turn a parsed spec into a validated chain and its initial labstate.

    Errors from stage construction are re-raised with ``line`` and ``stage``
    attributes pointing at the offending directive.
    """
    basis.check_rank(spec.initial_rank)
    try:
        initial = general_state(
            dict(spec.initial_state), spec.initial_rank, spec.initial_time, tolerance=max(tolerance, NORM_TOLERANCE)
        )
    except SFQMError as exc:
        exc.line = spec.state_line
        raise
    built: list[Optional[SemiUnitary]] = []
    rank, time = spec.initial_rank, spec.initial_time
    for number, st in enumerate(spec.stages, 1):
        try:
            stage = _build_stage(st, rank, time, built, tolerance)
        except SFQMError as exc:
            raise _annotate(exc, st, number)
        built.append(stage)
        rank, time = stage.target_rank, stage.target_time
    return StageChain(tuple(built), spec.initial_time, spec.initial_rank), initial


@dataclass(frozen=True)
class StageDiagnostic:
    number: int
    line: int
    kind: str
    report: Optional[ValidationReport] = None
    error: Optional[str] = None
    resource: bool = False
    reverse: bool = False

    @property
    def ok(self) -> bool:
        return self.error is None and self.report is not None and self.report.is_semiunitary and self.report.is_schrodinger


@dataclass(frozen=True)
class Diagnostics:
    stages: tuple[StageDiagnostic, ...]
    rank_issues: tuple[str, ...]
    normalization_deficit: float
    normalization_ok: bool
    state_line: int
    resource_error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return (
            self.normalization_ok
            and not self.rank_issues
            and self.resource_error is None
            and all(s.ok for s in self.stages)
        )

    @property
    def has_resource_error(self) -> bool:
        return self.resource_error is not None or any(s.resource for s in self.stages)


def validate(spec: ExperimentSpec, *, tolerance: float = DEFAULT_TOLERANCE) -> Diagnostics:
    """Elaborate every stage and collect diagnostics instead of raising."""
    n2 = sum(abs(c) ** 2 for _, c in spec.initial_state)
    deficit = 1.0 - n2
    norm_ok = abs(deficit) <= max(tolerance, NORM_TOLERANCE)
    try:
        basis.check_rank(spec.initial_rank)
    except ResourceError as exc:
        return Diagnostics((), (), deficit, norm_ok, spec.state_line, str(exc))
    except SFQMError as exc:
        return Diagnostics((), (str(exc),), deficit, norm_ok, spec.state_line)

    diags = []
    rank_issues = []
    built: list[Optional[SemiUnitary]] = []
    rank, time = spec.initial_rank, spec.initial_time
    for number, st in enumerate(spec.stages, 1):
        try:
            stage = _build_stage(st, rank, time, built, tolerance)
        except SFQMError as exc:
            diags.append(StageDiagnostic(number, st.line, st.kind, error=str(exc), resource=isinstance(exc, ResourceError)))
            built.append(None)
            if st.target_rank is not None:
                rank = st.target_rank
            elif st.kind == "reverse" and built[st.params[0] - 1] is not None:
                rank = built[st.params[0] - 1].source_rank
            time += 1
            continue
        built.append(stage)
        diags.append(StageDiagnostic(number, st.line, st.kind, report=stage.report, reverse=stage.reverse))
        if stage.target_rank < stage.source_rank and not stage.reverse:
            rank_issues.append(f"line {st.line}: stage {number} lowers the rank")
        rank, time = stage.target_rank, stage.target_time
    return Diagnostics(tuple(diags), tuple(rank_issues), deficit, norm_ok, spec.state_line)
