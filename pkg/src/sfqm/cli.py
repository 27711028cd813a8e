"""Command-line runner.

    sfqm run FILE [--paths] [--tol X] [--format table|records] [--sample N --seed S]
    sfqm check FILE [--tol X]

Exit codes: 0 success, 1 validation failure (semi-unitarity, Schrodinger
form, normalization, conservation), 2 parse or input error, 3 resource
limit (path budget, rank cap).
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from dataclasses import dataclass
from typing import Optional, TextIO

from . import basis
from .dsl import Diagnostics, ExperimentSpec, elaborate, parse, validate
from .errors import ParseError, ResourceError, SFQMError
from .evolution import DEFAULT_TOLERANCE
from .labstate import Labstate, OutcomeRow, OutcomeTable
from .pathsum import DEFAULT_PATH_BUDGET, conservation_check, evolve_by_paths, evolve_chain
from .sampling import sample_outcomes

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARSE = 2
EXIT_RESOURCE = 3

# rows and amplitude components at or below this are printed as absent / zero,
# so both evaluators render identical text despite rounding-level noise
DISPLAY_THRESHOLD = 1e-12


@dataclass(frozen=True)
class RunConfig:
    path: str
    mode: str = "run"
    evaluator: str = "iterated"
    tolerance: float = DEFAULT_TOLERANCE
    output_format: str = "table"
    sample_count: Optional[int] = None
    seed: Optional[int] = None
    path_budget: int = DEFAULT_PATH_BUDGET

    def __post_init__(self):
        if self.mode not in ("run", "check"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.evaluator not in ("iterated", "paths"):
            raise ValueError(f"unknown evaluator {self.evaluator!r}")
        if self.output_format not in ("table", "records"):
            raise ValueError(f"unknown output format {self.output_format!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.sample_count is not None and self.seed is None:
            raise ValueError("--sample requires --seed")
        if self.sample_count is not None and self.sample_count < 0:
            raise ValueError("sample count must be non-negative")


def _clean(x: float) -> float:
    return 0.0 if abs(x) <= DISPLAY_THRESHOLD else x


def format_amplitude_part(x: float) -> str:
    return f"{_clean(x):.11e}"


def format_probability(p: float) -> str:
    return f"{p:.12f}"


def _rows(state: Labstate) -> list[tuple[int, complex]]:
    return [(i, a) for i, a in state.amplitudes.items() if abs(a) > DISPLAY_THRESHOLD]


def _signals_text(signals: tuple[int, ...]) -> str:
    return "{" + ",".join(map(str, signals)) + "}"


def _labels_text(signals, labels: dict) -> str:
    return " ".join(f"{q}={json.dumps(labels[q])}" for q in signals if q in labels)


def render_table(spec: ExperimentSpec, state: Labstate) -> str:
    lines = [
        f"# experiment {spec.name}: rank {spec.initial_rank} -> {state.rank}, "
        f"time {spec.initial_time} -> {state.time}",
        f"{'index':>8}  {'occupation':<{max(10, state.rank)}}  {'signals':<12}  "
        f"{'amplitude_re':>18}  {'amplitude_im':>18}  {'probability':>14}  labels",
    ]
    for i, a in _rows(state):
        signals = basis.signal_set_of(i)
        lines.append(
            f"{i:>8}  {basis.occupation_string(i, state.rank):<{max(10, state.rank)}}  "
            f"{_signals_text(signals):<12}  {format_amplitude_part(a.real):>18}  "
            f"{format_amplitude_part(a.imag):>18}  {format_probability(abs(a) ** 2):>14}  "
            f"{_labels_text(signals, spec.labels)}".rstrip()
        )
    lines.append(f"total {format_probability(state.norm2())}")
    return "\n".join(lines) + "\n"


def render_records(spec: ExperimentSpec, state: Labstate) -> str:
    out = []
    for i, a in _rows(state):
        signals = basis.signal_set_of(i)
        record = {
            "index": i,
            "occupation": basis.occupation_string(i, state.rank),
            "signals": list(signals),
            "labels": {str(q): spec.labels[q] for q in signals if q in spec.labels},
            "re": float(format_amplitude_part(a.real)),
            "im": float(format_amplitude_part(a.imag)),
            "probability": float(format_probability(abs(a) ** 2)),
        }
        out.append(json.dumps(record))
    out.append(json.dumps({"total": float(format_probability(state.norm2()))}))
    return "\n".join(out) + "\n"


def render_samples(state: Labstate, count: int, seed: int, output_format: str) -> str:
    table = OutcomeTable(
        tuple(OutcomeRow(i, basis.signal_set_of(i), abs(a) ** 2) for i, a in state.amplitudes.items())
    )
    counts = Counter(sample_outcomes(table, count, seed))
    if output_format == "records":
        lines = [json.dumps({"samples": count, "seed": seed})]
        lines += [json.dumps({"signals": list(r.signals), "count": counts[r.signals]}) for r in table.rows]
    else:
        lines = [f"# samples {count} seed {seed}"]
        lines += [f"{_signals_text(r.signals):<12}  {counts[r.signals]}" for r in table.rows]
    return "\n".join(lines) + "\n"


def _report_diagnostics(path: str, diag: Diagnostics, out: TextIO, err: TextIO, verbose: bool) -> None:
    if not diag.normalization_ok:
        err.write(f"{path}:{diag.state_line}: initial state not normalized (deficit {diag.normalization_deficit:.3e})\n")
    if diag.resource_error:
        err.write(f"{path}:1: {diag.resource_error}\n")
    for msg in diag.rank_issues:
        err.write(f"{path}: {msg}\n")
    for s in diag.stages:
        if s.error is not None:
            err.write(f"{path}:{s.line}: stage {s.number} ({s.kind}): {s.error}\n")
            continue
        r = s.report
        if not r.is_semiunitary:
            err.write(
                f"{path}:{s.line}: stage {s.number} ({s.kind}): semi-unitarity deviation "
                f"{r.max_semiunitarity_deviation:.3e}\n"
            )
        if not r.is_schrodinger:
            err.write(
                f"{path}:{s.line}: stage {s.number} ({s.kind}): not Schrodinger form "
                f"(void image deviation {r.void_image_deviation:.3e}, signal leak to void "
                f"{r.signal_leak_to_void:.3e})\n"
            )
        if verbose:
            tag = " reverse" if s.reverse else ""
            out.write(
                f"stage {s.number} line {s.line} {s.kind}{tag}: deviation "
                f"{r.max_semiunitarity_deviation:.3e} schrodinger {'yes' if r.is_schrodinger else 'no'}\n"
            )


def execute(config: RunConfig, out: TextIO, err: TextIO) -> int:
    path = config.path
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        err.write(f"{path}: cannot read input: {exc.strerror or exc}\n")
        return EXIT_PARSE
    try:
        spec = parse(raw)
    except ParseError as exc:
        err.write(f"{path}:{exc.line}:{exc.column}: {exc.message}\n")
        return EXIT_PARSE

    diag = validate(spec, tolerance=config.tolerance)
    _report_diagnostics(path, diag, out, err, verbose=config.mode == "check")
    if diag.has_resource_error:
        return EXIT_RESOURCE
    if not diag.ok:
        return EXIT_VALIDATION

    try:
        chain, initial = elaborate(spec, tolerance=config.tolerance)
        if config.evaluator == "paths":
            final = evolve_by_paths(chain, initial, budget=config.path_budget)
        else:
            final = evolve_chain(chain, initial)
    except ResourceError as exc:
        err.write(f"{path}:{getattr(exc, 'line', 1)}: {exc}\n")
        return EXIT_RESOURCE
    except SFQMError as exc:
        err.write(f"{path}:{getattr(exc, 'line', 1)}: {exc}\n")
        return EXIT_VALIDATION

    drift = abs(final.norm2() - 1.0)
    if config.evaluator == "iterated":
        drift = max(drift, conservation_check(chain, initial))
    if drift > config.tolerance:
        err.write(f"{path}: total probability drifted by {drift:.3e} (tolerance {config.tolerance:.1e})\n")
        return EXIT_VALIDATION

    if config.mode == "check":
        out.write(f"ok: {len(chain)} stage(s), conservation drift {drift:.3e}\n")
        return EXIT_OK

    render = render_records if config.output_format == "records" else render_table
    out.write(render(spec, final))
    if config.sample_count is not None:
        out.write(render_samples(final, config.sample_count, config.seed, config.output_format))
    return EXIT_OK


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfqm", description="Run or check an experiment file.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in ("run", "check"):
        p = sub.add_parser(mode)
        p.add_argument("file", help="experiment description")
        p.add_argument("--tol", type=_positive_float, default=DEFAULT_TOLERANCE, help="validation tolerance (default %(default)g)")
        p.add_argument("--paths", action="store_true", help="evaluate by explicit path summation")
        if mode == "run":
            p.add_argument("--format", choices=("table", "records"), default="table", help="output format (default %(default)s)")
            p.add_argument("--sample", type=int, metavar="N", help="draw N outcomes from the final table")
            p.add_argument("--seed", type=int, metavar="S", help="sampler seed, required with --sample")
    return parser


def main(argv=None, out: TextIO = None, err: TextIO = None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = _build_parser()
    args = parser.parse_args(argv)
    sample = getattr(args, "sample", None)
    seed = getattr(args, "seed", None)
    if sample is not None and seed is None:
        parser.error("--sample requires --seed")
    if sample is not None and sample < 0:
        parser.error("--sample must be non-negative")
    config = RunConfig(
        path=args.file,
        mode=args.mode,
        evaluator="paths" if args.paths else "iterated",
        tolerance=args.tol,
        output_format=getattr(args, "format", "table"),
        sample_count=sample,
        seed=seed,
    )
    return execute(config, out, err)


if __name__ == "__main__":
    sys.exit(main())
