import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import SQRT_HALF, kron_creation, random_unit_vector
from sfqm.errors import DomainError, NormalizationError
from sfqm.labstate import (
    Labstate,
    born_probability,
    class_probability,
    from_dense,
    general_state,
    lift_signal_creation,
    one_signal_state,
    outcome_table,
    void_state,
)


@pytest.fixture
def quarter_state():
    """alpha = beta = gamma = delta = 1/2 on a rank-2 net."""
    return general_state({0: 0.5, 1: 0.5, 2: 0.5, 3: 0.5}, 2)


def test_void_state():
    v = void_state(3, 0)
    assert dict(v.amplitudes) == {0: 1}
    assert v.norm2() == 1
    assert outcome_table(v).as_pairs() == [((), 1.0)]


def test_one_signal_state():
    assert dict(one_signal_state([1, 0], 2).amplitudes) == {1: 1}
    s = one_signal_state([SQRT_HALF, SQRT_HALF], 2)
    assert s.amplitudes[1] == pytest.approx(0.7071067811865476)
    assert s.amplitudes[2] == pytest.approx(0.7071067811865476)
    with pytest.raises(NormalizationError) as err:
        one_signal_state([1, 1], 2)
    assert err.value.deficit == pytest.approx(-1.0)
    with pytest.raises(DomainError):
        one_signal_state([1], 2)


def test_general_state(quarter_state):
    assert set(quarter_state.amplitudes) == {0, 1, 2, 3}
    assert dict(general_state({0: 1}, 1).amplitudes) == {0: 1}
    with pytest.raises(DomainError):
        general_state({5: 1}, 2)
    with pytest.raises(NormalizationError):
        general_state({0: 0.5}, 2)


def test_born_probability(quarter_state):
    assert born_probability(quarter_state, 3) == 0.25
    assert born_probability(void_state(2), 0) == 1
    assert born_probability(void_state(2), 1) == 0
    with pytest.raises(DomainError):
        born_probability(void_state(2), 4)


def test_outcome_table(quarter_state):
    assert outcome_table(quarter_state).as_pairs() == [((), 0.25), ((1,), 0.25), ((2,), 0.25), ((1, 2), 0.25)]
    pairs = outcome_table(one_signal_state([SQRT_HALF, SQRT_HALF], 2)).as_pairs()
    assert [p[0] for p in pairs] == [(1,), (2,)]
    assert [p[1] for p in pairs] == pytest.approx([0.5, 0.5], abs=1e-15)
    unnormalized = lift_signal_creation(one_signal_state([SQRT_HALF, SQRT_HALF], 2), 2)
    with pytest.raises(NormalizationError):
        outcome_table(unnormalized)


def test_class_probability(quarter_state):
    assert class_probability(quarter_state, 1) == 0.5
    assert class_probability(void_state(3), 0) == 1
    assert class_probability(one_signal_state([1, 0], 2), 2) == 0
    with pytest.raises(DomainError):
        class_probability(void_state(2), 3)


def test_lift_signal_creation():
    assert dict(lift_signal_creation(void_state(2), 1).amplitudes) == {1: 1}
    assert lift_signal_creation(lift_signal_creation(void_state(2), 1), 1).is_zero()
    # derived by hand: the |01) term is annihilated, |10) -> |11)
    lifted = lift_signal_creation(one_signal_state([SQRT_HALF, SQRT_HALF], 2), 2)
    assert set(lifted.amplitudes) == {3}
    assert lifted.amplitudes[3] == pytest.approx(SQRT_HALF, abs=1e-15)
    assert lifted.norm2() == pytest.approx(0.5, abs=1e-15)
    assert not lifted.normalized
    with pytest.raises(DomainError):
        lift_signal_creation(void_state(2), 3)


def test_lift_matches_dense_operator(rng):
    for r in range(1, 5):
        psi = from_dense(random_unit_vector(1 << r, rng), r)
        for i in range(1, r + 1):
            expected = kron_creation(i, r) @ psi.to_dense()
            np.testing.assert_allclose(lift_signal_creation(psi, i).to_dense(), expected, atol=1e-15)


def test_pruning():
    s = from_dense(np.array([1.0, 1e-16, 0, 0]), 2)
    assert dict(s.amplitudes) == {0: 1}


def test_equality_ignores_normalized_flag():
    a = Labstate(0, 1, {1: 1})
    b = Labstate(0, 1, {1: 1}, normalized=False)
    assert a == b
    assert a != Labstate(1, 1, {1: 1})


states = st.integers(1, 5).flatmap(
    lambda r: st.tuples(
        st.just(r),
        st.lists(
            st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1 << r, max_size=1 << r
        ).filter(lambda xs: sum(a * a + b * b for a, b in xs) > 1e-3),
    )
)


def _state(args):
    r, xs = args
    v = np.array([complex(a, b) for a, b in xs])
    return from_dense(v / np.linalg.norm(v), r)


@settings(max_examples=60)
@given(states)
def test_normalization_and_born_completeness(args):
    psi = _state(args)
    assert psi.normalized
    assert abs(psi.norm2() - 1) <= 1e-10
    table = outcome_table(psi)
    assert all(0 <= row.probability <= 1 for row in table.rows)
    assert abs(table.total - 1) <= 1e-10
    by_class = sum(class_probability(psi, k) for k in range(psi.rank + 1))
    assert abs(by_class - 1) <= 1e-10


@settings(max_examples=60)
@given(states, st.data())
def test_lift_nilpotent_and_commuting(args, data):
    psi = _state(args)
    r = psi.rank
    i = data.draw(st.integers(1, r))
    assert lift_signal_creation(lift_signal_creation(psi, i), i).is_zero()
    if r >= 2:
        j = data.draw(st.integers(1, r).filter(lambda q: q != i))
        ij = lift_signal_creation(lift_signal_creation(psi, i), j)
        ji = lift_signal_creation(lift_signal_creation(psi, j), i)
        assert set(ij.amplitudes) == set(ji.amplitudes)
        for k in ij.amplitudes:
            assert abs(ij.amplitudes[k] - ji.amplitudes[k]) <= 1e-15
