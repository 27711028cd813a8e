"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints
a PASS/FAIL line for each criterion number.
"""

import io
import itertools
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from conftest import DATA_DIR, EXAMPLES_DIR
from oracles import SQRT_HALF, bs2, mz_oracle, random_unit_vector
from sfqm import basis
from sfqm.cli import EXIT_OK, EXIT_PARSE, EXIT_RESOURCE, EXIT_VALIDATION, main
from sfqm.dsl import elaborate, parse
from sfqm.errors import ClassCollisionError, ValidationError
from sfqm.evolution import (
    apply,
    check_schrodinger,
    compose,
    extend_one_signal,
    make_stage,
    random_stage,
    reverse_stage,
)
from sfqm.labstate import from_dense, one_signal_state, void_state
from sfqm.pathsum import StageChain, amplitude, amplitude_by_paths, conservation_check, evolve_chain

SHAPES = [(2, 2), (4, 2), (4, 4), (8, 4), (8, 8)]
GOLDEN_DIR = Path(__file__).parent / "golden"


def orthonormal_columns(rows, cols, rng):
    z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, _ = np.linalg.qr(z)
    return q


def builtin_stages(rank=3):
    """One instance of every builtin stage kind, elaborated through the DSL."""
    text = f"""experiment builtins
rank {rank}
state 1 1
stage bs 1 2 0.3 1.1
stage phase 2 2.5
stage swap 1 3
stage grow {rank + 1} 1: 1 0.6 {rank + 1} 0,0.8
stage reverse 4
"""
    chain, _ = elaborate(parse(text))
    return list(chain.stages)


def accepted_stages(rng):
    stages = []
    for rows, cols in SHAPES:
        stages.append(make_stage(orthonormal_columns(rows, cols, rng), cols.bit_length() - 1, rows.bit_length() - 1))
    return stages + builtin_stages()


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.mark.criterion(1)
def test_semi_unitarity(rng):
    worst = 0.0
    for rows, cols in SHAPES:
        for _ in range(100):
            stage = make_stage(orthonormal_columns(rows, cols, rng), cols.bit_length() - 1, rows.bit_length() - 1)
            worst = max(worst, stage.report.max_semiunitarity_deviation)
    assert worst <= 1e-10
    with pytest.raises(ValidationError):
        make_stage([[1, 1], [0, 0]], 1, 1)


@pytest.mark.criterion(2)
def test_norm_and_inner_product_preservation(rng):
    stages = accepted_stages(rng)
    for stage in stages:
        rank = stage.source_rank
        if stage.reverse:
            # a co-isometry is only norm preserving on the image of its forward stage
            partner = next(f for f in stages if np.array_equal(f.matrix.conj().T, stage.matrix))
            draw = lambda: partner.matrix @ random_unit_vector(partner.source_dim, rng)  # noqa: E731
        else:
            draw = lambda: random_unit_vector(stage.source_dim, rng)  # noqa: E731
        for _ in range(100):
            a = from_dense(draw(), rank, stage.source_time)
            b = from_dense(draw(), rank, stage.source_time)
            ua, ub = apply(stage, a).to_dense(), apply(stage, b).to_dense()
            assert abs(np.linalg.norm(ua) - 1.0) <= 1e-10
            before = np.vdot(a.to_dense(), b.to_dense())
            assert abs(np.vdot(ua, ub) - before) <= 1e-9


@pytest.mark.criterion(3)
def test_path_sum_matches_iteration(rng):
    checked = 0
    for length in range(1, 5):
        for ranks in itertools.product(range(1, 4), repeat=length + 1):
            if any(b < a for a, b in zip(ranks, ranks[1:])):
                continue
            stages = [random_stage(a, b, rng, k) for k, (a, b) in enumerate(zip(ranks, ranks[1:]))]
            chain = StageChain.of(stages, time=0, rank=ranks[0])
            psi = from_dense(random_unit_vector(1 << ranks[0], rng), ranks[0])
            for j in range(1 << ranks[-1]):
                assert abs(amplitude_by_paths(j, chain, psi) - amplitude(j, chain, psi)) <= 1e-12
            checked += 1
    assert checked == 6 + 10 + 15 + 21


@pytest.mark.criterion(4)
def test_total_probability_conservation(rng, example_files):
    for _ in range(50):
        chain = StageChain.of([random_stage(1, 2, rng, 0), random_stage(2, 3, rng, 1)], time=0, rank=1)
        psi = from_dense(random_unit_vector(2, rng), 1)
        assert conservation_check(chain, psi) <= 1e-10
    assert len(example_files) >= 4
    for path in example_files:
        chain, initial = elaborate(parse(path.read_text()))
        assert conservation_check(chain, initial) <= 1e-10, path.name


@pytest.mark.criterion(5)
def test_schrodinger_structure(rng):
    stages = builtin_stages()
    assert [s.source_rank for s in stages] == [3, 3, 3, 3, 4]
    for stage in stages:
        m = stage.matrix
        assert m[0, 0] == 1  # void column is exactly the void vector
        assert np.all(m[1:, 0] == 0)
        assert np.all(m[0, 1:] == 0)
        assert check_schrodinger(stage).is_schrodinger
    forward = [s for s in stages if not s.reverse]
    composed = forward[0]
    for stage in forward[1:]:
        composed = compose(stage, composed)
        assert check_schrodinger(composed).is_schrodinger
    a, b = random_stage(2, 2, rng, 0), random_stage(2, 3, rng, 1)
    assert check_schrodinger(compose(b, a)).is_schrodinger
    assert not check_schrodinger(make_stage([[0, 1], [1, 0]], 1, 1)).is_schrodinger


@pytest.mark.criterion(6)
def test_basis_census_and_round_trip():
    for r in range(1, 13):
        assert sum(basis.class_size(r, k) for k in range(r + 1)) == 2**r
        assert sum(math.comb(r, k) for k in range(r + 1)) == 2**r
        counts = [0] * (r + 1)
        for x in range(2**r):
            occ = basis.occupation_of(x, r)
            assert basis.computational_index(occ) == x
            assert basis.index_of_signals(basis.signal_set_of(x)) == x
            counts[basis.signal_class(x)] += 1
        assert counts == [math.comb(r, k) for k in range(r + 1)]


MZ_TEMPLATE = """experiment mz
rank 2
state 1 1
stage bs 1 2 0.7853981633974483 0
{middle}stage bs 1 2 0.7853981633974483 0
"""


def _mz_final(phase=None, state="1 1"):
    middle = "" if phase is None else f"stage phase 1 {float(phase)!r}\n"
    text = MZ_TEMPLATE.format(middle=middle).replace("state 1 1", f"state {state}")
    chain, initial = elaborate(parse(text))
    return evolve_chain(chain, initial)


@pytest.mark.criterion(7)
def test_mach_zehnder_interference():
    plain = _mz_final()
    assert abs(abs(plain.amplitude(2)) ** 2 - 1.0) <= 1e-12
    flipped = _mz_final(np.pi)
    assert abs(abs(flipped.amplitude(1)) ** 2 - 1.0) <= 1e-12
    for phase in np.linspace(0, 2 * np.pi, 16, endpoint=False):
        oracle = mz_oracle(phase)
        for col, state in ((0, "1 1"), (1, "2 1")):
            final = _mz_final(phase, state)
            assert abs(final.amplitude(1) - oracle[0, col]) <= 1e-12
            assert abs(final.amplitude(2) - oracle[1, col]) <= 1e-12
            assert abs(final.amplitude(0)) <= 1e-12
            assert abs(final.amplitude(3)) <= 1e-12


@pytest.mark.criterion(8)
def test_time_reversal(rng):
    shapes = [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3)]
    for k in range(20):
        sr, tr = shapes[k % len(shapes)]
        u = random_stage(sr, tr, rng, 0, schrodinger=k % 2 == 0)
        chain = StageChain.of([u, reverse_stage(u)], time=0, rank=sr)
        psi = from_dense(random_unit_vector(1 << sr, rng), sr)
        final = evolve_chain(chain, psi)
        assert final.rank == sr
        assert np.max(np.abs(final.to_dense() - psi.to_dense())) <= 1e-10
        assert abs(final.norm2() - 1.0) <= 1e-10
        assert abs(evolve_chain(StageChain.of([u], time=0, rank=sr), psi).norm2() - 1.0) <= 1e-10


@pytest.mark.criterion(9)
def test_two_signal_collision():
    block = bs2(np.pi / 4)
    assert np.allclose(block, SQRT_HALF * np.array([[1, 1j], [1j, 1]]))
    with pytest.raises(ClassCollisionError) as exc:
        extend_one_signal(block, (0, 1, 2))
    assert exc.value.signals == (1, 2)
    assert abs(exc.value.image_norm) <= 1e-12
    # the single-signal part alone is fine
    stage = extend_one_signal(block, (0, 1))
    out = apply(stage, one_signal_state([1, 0], 2))
    assert abs(out.amplitude(1) - SQRT_HALF) <= 1e-12
    assert abs(out.amplitude(2) - 1j * SQRT_HALF) <= 1e-12
    assert apply(stage, void_state(2)) == void_state(2, 1)


BROKEN_CORPUS = [
    ("valid_matrix_grow", EXIT_OK),
    ("broken_nonisometric", EXIT_VALIDATION),
    ("broken_flip", EXIT_VALIDATION),
    ("broken_unnormalized", EXIT_VALIDATION),
    ("broken_bad_qubit", EXIT_VALIDATION),
    ("broken_unknown_stage", EXIT_PARSE),
    ("broken_missing_state", EXIT_PARSE),
    ("broken_complex", EXIT_PARSE),
    ("broken_rank_cap", EXIT_RESOURCE),
    ("broken_stage_cap", EXIT_RESOURCE),
]


@pytest.mark.criterion(10)
def test_cli_determinism_and_exit_codes(example_files):
    for path in example_files:
        name = path.stem
        for fmt, suffix in (("table", "table.txt"), ("records", "records.jsonl")):
            golden = (GOLDEN_DIR / f"{name}.{suffix}").read_text()
            outputs = [run_cli("run", "--format", fmt, *extra, path) for extra in ([], [], ["--paths"], ["--paths"])]
            for code, out, err in outputs:
                assert code == EXIT_OK and err == ""
                assert out == golden, (name, fmt)
        proc = subprocess.run(
            [sys.executable, "-m", "sfqm", "run", "--paths", str(path)], capture_output=True, check=False
        )
        assert proc.returncode == 0
        assert proc.stdout == (GOLDEN_DIR / f"{name}.table.txt").read_bytes()
        assert run_cli("check", path)[0] == EXIT_OK
    for name, expected in BROKEN_CORPUS:
        assert run_cli("check", DATA_DIR / f"{name}.sfqm")[0] == expected, name
    assert run_cli("check", DATA_DIR / "no_such_file.sfqm")[0] == EXIT_PARSE
    assert EXAMPLES_DIR.is_dir()
