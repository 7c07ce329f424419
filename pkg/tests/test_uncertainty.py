import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ottd.action_dist import ActionDistPair, normalize_values
from ottd.errors import DimensionMismatch
from ottd.ot_core import SinkhornConfig, exact_ot, sinkhorn, zero_one_cost
from ottd.uncertainty import UncertaintyEstimator, flow_imbalance, uncertainty_scores


@st.composite
def pair(draw, max_n=8):
    n = draw(st.integers(2, max_n))
    w = st.floats(0.01, 1.0)
    a = np.array(draw(st.lists(w, min_size=n, max_size=n)))
    b = np.array(draw(st.lists(w, min_size=n, max_size=n)))
    return a / a.sum(), b / b.sum()


def test_flow_imbalance_diagonal_plan():
    np.testing.assert_array_equal(flow_imbalance(np.diag([0.25] * 4)), np.zeros(4))


def test_flow_imbalance_two_by_two():
    np.testing.assert_allclose(flow_imbalance(np.array([[0.4, 0.3], [0.0, 0.3]])), [0.3, 0.3])


def test_flow_imbalance_needs_square_plan():
    with pytest.raises(DimensionMismatch):
        flow_imbalance(np.ones((2, 3)) / 6)


@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_flow_imbalance_identity_on_random_plans(n, seed):
    # any nonnegative matrix is a plan between its own marginals
    P = np.random.default_rng(seed).random((n, n))
    P /= P.sum()
    np.testing.assert_allclose(flow_imbalance(P), np.abs(P.sum(axis=1) - P.sum(axis=0)), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(pair())
def test_flow_imbalance_is_plan_independent(p):
    mu, nu = p
    C = zero_one_cost(mu.size)
    a = flow_imbalance(sinkhorn(mu, nu, C, SinkhornConfig(epsilon=0.01))[0])
    b = flow_imbalance(sinkhorn(mu, nu, C, SinkhornConfig(epsilon=0.5))[0])
    c = flow_imbalance(exact_ot(mu, nu, C)[0])
    tol = 2 * SinkhornConfig().convergence_tol
    assert np.abs(a - b).max() <= tol and np.abs(a - c).max() <= tol


def test_scores_identical_distributions_are_zero():
    q = np.array([0.1, 0.2, 0.3, 0.4])
    s = uncertainty_scores(ActionDistPair(q, q.copy()))
    np.testing.assert_array_equal(s.u, np.zeros(4))
    assert s.total <= 1e-8


def test_scores_two_point_example():
    s = uncertainty_scores(ActionDistPair(np.array([0.7, 0.3]), np.array([0.4, 0.6])), mode="oracle")
    assert s.total == pytest.approx(0.3, abs=1e-12)
    np.testing.assert_allclose(s.delta, [0.3, 0.3], atol=1e-12)
    np.testing.assert_allclose(s.u, [1, 1], atol=1e-12)


def test_scores_uniform_vs_ramp():
    # |q - t| = (0.15, 0.05, 0.05, 0.15); W is half of that sum
    s = uncertainty_scores(ActionDistPair(np.full(4, 0.25), np.array([0.1, 0.2, 0.3, 0.4])), mode="oracle")
    assert s.total == pytest.approx(0.2, abs=1e-12)
    np.testing.assert_allclose(s.u, [0.75, 0.25, 0.25, 0.75], atol=1e-12)


def test_scores_reject_bad_arguments():
    p = ActionDistPair(np.array([0.5, 0.5]), np.array([0.2, 0.3, 0.5]))
    with pytest.raises(DimensionMismatch):
        uncertainty_scores(p)
    with pytest.raises(ValueError):
        uncertainty_scores(ActionDistPair(np.array([1.0]), np.array([1.0])), guard=0)
    with pytest.raises(ValueError):
        uncertainty_scores(ActionDistPair(np.array([1.0]), np.array([1.0])), mode="lp")


@settings(max_examples=100, deadline=None)
@given(pair())
def test_oracle_scores_sum_to_two(p):
    s = uncertainty_scores(ActionDistPair(*p), mode="oracle")
    assert s.u.min() >= 0 and s.delta.max() <= 1
    if s.total > 1e-8:
        assert abs(s.u.sum() - 2) <= 1e-9
    else:
        assert not s.u.any()


@settings(max_examples=50, deadline=None)
@given(pair())
def test_sinkhorn_scores_sum_near_two(p):
    s = uncertainty_scores(ActionDistPair(*p), cfg=SinkhornConfig(epsilon=0.01))
    if s.total > 1e-8:
        assert 1.8 <= s.u.sum() <= 2.2


@given(pair())
def test_scores_zero_iff_total_below_guard(p):
    s = uncertainty_scores(ActionDistPair(*p), mode="oracle")
    assert (not s.u.any()) == (s.total <= 1e-8)


@given(st.lists(st.floats(-50, 50), min_size=4, max_size=4), st.lists(st.floats(-50, 50), min_size=4, max_size=4))
def test_estimator_fast_path_matches_general_path(q, t):
    fast = UncertaintyEstimator().scores(q, t)
    pair_ = ActionDistPair(normalize_values(q), normalize_values(t))
    slow = uncertainty_scores(pair_, mode="oracle").u
    np.testing.assert_allclose(fast, slow, atol=1e-12)


def test_estimator_sinkhorn_mode_close_to_oracle():
    rng = np.random.default_rng(4)
    q, t = rng.normal(size=(20, 4)), rng.normal(size=(20, 4))
    a = UncertaintyEstimator().score_table(q, t)
    b = UncertaintyEstimator(mode="sinkhorn").score_table(q, t)
    assert np.abs(a - b).max() <= 1e-4


def test_estimator_initial_tables_give_zero():
    assert not UncertaintyEstimator().scores(np.zeros(4), np.zeros(4)).any()


def test_estimator_validation():
    with pytest.raises(ValueError):
        UncertaintyEstimator(mode="exact")
    with pytest.raises(ValueError):
        UncertaintyEstimator(guard=0)
