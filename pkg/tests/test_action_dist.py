import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from ottd.action_dist import (
    TargetBuffer,
    action_dists,
    new_qtable,
    normalize_values,
    q_distribution,
    read_table_csv,
    t_distribution,
    update_target,
    write_table_csv,
)
from ottd.errors import NonFiniteInput

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_normalize_constant_is_uniform():
    np.testing.assert_allclose(normalize_values([5, 5, 5, 5]), [0.25] * 4)


def test_normalize_shift():
    np.testing.assert_allclose(normalize_values([-1, 0, 1]), [0, 1 / 3, 2 / 3])


def test_normalize_worked_example():
    np.testing.assert_allclose(normalize_values([0.2, 0.3, 0.1, 0.4]), [1 / 6, 1 / 3, 0, 1 / 2])


def test_normalize_proportional_scheme():
    np.testing.assert_allclose(normalize_values([0.2, 0.3, 0.1, 0.4], "proportional"), [0.2, 0.3, 0.1, 0.4])
    with pytest.raises(ValueError):
        normalize_values([-1, 1], "proportional")
    with pytest.raises(ValueError):
        normalize_values([1, 2], "softmax")


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_normalize_rejects_non_finite(bad):
    with pytest.raises(NonFiniteInput):
        normalize_values([0.0, bad])


@given(st.lists(finite, min_size=1, max_size=8))
def test_normalize_is_probvec(raw):
    p = normalize_values(raw)
    assert p.min() >= 0
    assert abs(p.sum() - 1) <= 1e-9


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=8), st.floats(0.1, 10), st.floats(-100, 100))
def test_normalize_affine_invariance(raw, c, d):
    x = np.array(raw)
    assume(np.ptp(x) > 1e-3)
    p, q = normalize_values(x), normalize_values(c * x + d)
    np.testing.assert_allclose(p, q, atol=1e-9)
    assert set(np.flatnonzero(p == p.max())) == set(np.flatnonzero(q == q.max()))


def test_q_distribution_examples():
    q = new_qtable(3, 3)
    np.testing.assert_allclose(q_distribution(q, 0), [1 / 3] * 3)
    q = np.array([[1.0, 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(q_distribution(q, 0), [1, 0])
    q = np.array([[-2.0, -1.0, -1.0]])
    np.testing.assert_allclose(q_distribution(q, 0), [0, 0.5, 0.5])


def test_t_distribution_examples():
    buf = TargetBuffer.create(2, 3)
    np.testing.assert_allclose(t_distribution(buf, 1), [1 / 3] * 3)
    buf.values[0] = [-2.0, -1.0, -1.0]
    np.testing.assert_allclose(t_distribution(buf, 0), [0, 0.5, 0.5])
    buf.values[1, :2] = [1.0, 0.0]
    np.testing.assert_allclose(t_distribution(buf, 1, n_actions=2), [1, 0])


def test_initial_pair_is_uniform():
    pair = action_dists(new_qtable(4, 4), TargetBuffer.create(4, 4), 2)
    np.testing.assert_allclose(pair.q_dist, pair.t_dist)


def test_update_target_values():
    buf = TargetBuffer.create(2, 2)
    update_target(buf, 0, 0, -1.0, 0.99, 0.0)
    assert buf.values[0, 0] == -1.0
    update_target(buf, 0, 0, 101.0, 0.99, 50.0)
    assert buf.values[0, 0] == pytest.approx(150.5)


def test_update_target_last_write_wins_and_frame():
    buf = TargetBuffer.create(3, 2)
    update_target(buf, 1, 0, 1.0, 0.5, 2.0)
    update_target(buf, 1, 0, 3.0, 0.5, 0.0)
    assert buf.values[1, 0] == 3.0
    mask = np.ones_like(buf.seen)
    mask[1, 0] = False
    assert np.all(buf.values[mask] == 0) and not buf.seen[mask].any()
    assert buf.seen[1, 0]


@given(st.integers(0, 4), st.integers(0, 3), finite, finite)
def test_update_target_touches_one_cell(s, a, r, qn):
    buf = TargetBuffer.create(5, 4, init=7.0)
    before = buf.copy()
    update_target(buf, s, a, r, 0.9, qn)
    changed = (buf.values != before.values) | (buf.seen != before.seen)
    changed[s, a] = False
    assert not changed.any()


def test_table_csv_round_trip(tmp_path):
    q = np.random.default_rng(0).normal(size=(4, 3))
    write_table_csv(q, tmp_path / "q.csv")
    np.testing.assert_array_equal(read_table_csv(tmp_path / "q.csv"), q)
