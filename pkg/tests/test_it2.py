import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from it2mlc.errors import InputError
from it2mlc.it2 import (
    DEFAULT_LAMBDA,
    FuzzifierPair,
    It2Label,
    build_interval,
    defuzz_scores,
    defuzzify,
    derive_fuzzifiers,
    it2_loss,
    it2_loss_grad,
    predicted_cardinality,
    round_half_up,
    top_k_mask,
    type1_binarize,
    type1_loss,
    type1_loss_grad,
)
from it2mlc.numerics import grad_check

unit = st.floats(0, 1, allow_nan=False)


@st.composite
def instance(draw, max_labels=8):
    L = draw(st.integers(1, max_labels))
    y = draw(arrays(np.float64, L, elements=unit))
    m_hat = draw(st.floats(1, L))
    card = draw(st.integers(1, L))
    return y, m_hat, card, L


def interval(lower, upper):
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    return It2Label(lower, upper, upper, FuzzifierPair(np.array(1.0), np.array(1.0)))


# fuzzifiers

def test_direct_formula():
    p = derive_fuzzifiers(2.0, 2, 6)
    assert (float(p.m_lower), float(p.m_upper)) == pytest.approx((1.0, 1 / 3))
    p = derive_fuzzifiers(1.5, 1, 6)
    assert (float(p.m_lower), float(p.m_upper)) == pytest.approx((1.5, 0.25))


def test_full_cardinality_collapses_interval():
    p = derive_fuzzifiers(3.7, 6, 6)
    assert float(p.m_lower) == float(p.m_upper)
    it2 = build_interval(np.array([0.2, 0.9]), p)
    np.testing.assert_array_equal(it2.lower, it2.upper)


@pytest.mark.parametrize("card", [0, 7])
def test_bad_cardinality(card):
    with pytest.raises(InputError):
        derive_fuzzifiers(2.0, card, 6)


def test_pair_invariants():
    with pytest.raises(InputError):
        FuzzifierPair(np.array(0.5), np.array(1.0))
    with pytest.raises(InputError):
        FuzzifierPair(np.array(np.inf), np.array(1.0))
    with pytest.raises(InputError):
        FuzzifierPair(np.array(0.0), np.array(0.0))


def test_rounding_is_half_up_and_clamped():
    np.testing.assert_array_equal(round_half_up([0.5, 1.5, 2.5, 2.49]), [1, 2, 3, 2])
    np.testing.assert_array_equal(predicted_cardinality([0.2, 3.5, 9.0], 6), [1, 4, 6])


# intervals

def test_unit_membership_gives_point_interval():
    it2 = build_interval(np.array([1.0]), FuzzifierPair(np.array(3.0), np.array(0.2)))
    assert it2.lower[0] == it2.upper[0] == 1.0


def test_hand_exponentiation():
    it2 = build_interval(np.array([0.5]), derive_fuzzifiers(2.0, 2, 6))
    assert it2.lower[0] == pytest.approx(0.5)
    assert it2.upper[0] == pytest.approx(0.7937005259840998)   # cube root of 0.5


def test_floor_prevents_zero_base():
    it2 = build_interval(np.array([0.0]), FuzzifierPair(np.array(2.0), np.array(0.5)))
    assert it2.lower[0] == pytest.approx(1e-12) and it2.upper[0] == pytest.approx(1e-3)


def test_batch_broadcasts_per_row_fuzzifiers():
    y = np.array([[0.5, 0.25], [0.5, 0.25]])
    pair = FuzzifierPair(np.array([1.0, 2.0]), np.array([1.0, 1.0]))
    it2 = build_interval(y, pair)
    np.testing.assert_allclose(it2.lower, [[0.5, 0.25], [0.25, 0.0625]])


@settings(max_examples=300, deadline=None)
@given(instance())
def test_interval_ordering(inst):
    y, m_hat, card, L = inst
    it2 = build_interval(y, derive_fuzzifiers(m_hat, card, L))
    assert np.all(0 <= it2.lower) and np.all(it2.lower <= it2.upper) and np.all(it2.upper <= 1)


# losses

def test_perfect_match_is_minimum():
    ys = np.array([1.0, 0.0, 1.0])
    assert it2_loss(build_interval(ys, FuzzifierPair(np.array(1.0), np.array(1.0))), ys) == pytest.approx(-2.0)


def test_orthogonal_is_zero():
    it2 = interval([0, 0.7, 0], [0, 0.9, 0])
    assert it2_loss(it2, np.array([1, 0, 1])) == 0.0


def test_hand_arithmetic():
    y = np.array([0.8, 0.1, 0.6])
    ys = np.array([1, 0, 1])
    it2 = build_interval(y, FuzzifierPair(np.array(1.0), np.array(1.0)))
    assert it2_loss(it2, ys) == pytest.approx(-1.6, abs=1e-8)
    assert type1_loss(y, ys) == pytest.approx(-0.8, abs=1e-8)
    assert type1_loss(ys, ys) == pytest.approx(-1.0)
    assert type1_loss(np.array([0, 0.5, 0]), ys) == 0.0


def test_all_zero_target_and_prediction_is_finite():
    assert type1_loss(np.zeros(3), np.zeros(3)) == 0.0


@settings(max_examples=300, deadline=None)
@given(instance(), st.data())
def test_loss_range(inst, data):
    y, m_hat, card, L = inst
    ys = data.draw(arrays(np.int64, L, elements=st.integers(0, 1)))
    value = it2_loss(build_interval(y, derive_fuzzifiers(m_hat, card, L)), ys)
    assert -2.0 - 1e-12 <= value <= 0.0


@settings(max_examples=300, deadline=None)
@given(instance(), st.data())
def test_monotone_in_positive_labels(inst, data):
    y, m_hat, card, L = inst
    ys = data.draw(arrays(np.int64, L, elements=st.integers(0, 1)))
    assume(ys.any())
    j = data.draw(st.sampled_from(list(np.flatnonzero(ys))))
    bump = data.draw(st.floats(0, 1))
    y2 = y.copy()
    y2[j] = y[j] + bump * (1 - y[j])
    pair = derive_fuzzifiers(m_hat, card, L)
    assert it2_loss(build_interval(y2, pair), ys) <= it2_loss(build_interval(y, pair), ys) + 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_loss_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    y = rng.uniform(0.05, 0.95, (4, 5))
    ys = (rng.random((4, 5)) < 0.4).astype(float)
    ys[:, 0] = 1
    m_hat = rng.uniform(1, 5, 4)
    pair = derive_fuzzifiers(m_hat, ys.sum(1), 5)
    _, g = it2_loss_grad(y, ys, pair)
    assert grad_check([y], lambda: it2_loss(build_interval(y, pair), ys), [g]).passed
    _, g1 = type1_loss_grad(y, ys)
    assert grad_check([y], lambda: type1_loss(y, ys), [g1]).passed


def test_loss_grad_value_agrees_with_loss():
    y = np.array([[0.3, 0.6]])
    ys = np.array([[1, 0]])
    pair = derive_fuzzifiers(np.array([1.4]), np.array([1]), 2)
    value, _ = it2_loss_grad(y, ys, pair)
    assert value == it2_loss(build_interval(y, pair), ys)


# defuzzification

def test_equal_midpoints_at_zero_lambda():
    it2 = interval([0.3, 0.4], [0.6, 0.5])
    np.testing.assert_allclose(defuzz_scores(it2, 0.0), [0.45, 0.45])


def test_positive_lambda_prefers_tighter_interval():
    it2 = interval([0.3, 0.4], [0.6, 0.5])
    np.testing.assert_allclose(defuzz_scores(it2, 0.1), [0.435, 0.445])
    pred = defuzzify(it2, 1.0, 0.1)
    np.testing.assert_array_equal(pred.y_hat, [0, 1])


def test_ties_go_to_lower_index():
    it2 = interval([0.25, 0.375], [0.5, 0.375])   # exact binary fractions, equal midpoints
    np.testing.assert_array_equal(defuzzify(it2, 1.0, 0.0).y_hat, [1, 0])
    np.testing.assert_array_equal(top_k_mask(np.array([0.2, 0.5, 0.5, 0.5]), 2), [0, 1, 1, 0])


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 5, elements=unit), st.floats(0, 10))
def test_degenerate_interval_scores_are_upper(y, lam):
    pair = FuzzifierPair(np.array(0.7), np.array(0.7))
    it2 = build_interval(y, pair)
    np.testing.assert_allclose(defuzz_scores(it2, lam), it2.upper, rtol=1e-12)


def test_default_lambda():
    assert DEFAULT_LAMBDA == 0.1


def test_negative_lambda_rejected():
    with pytest.raises(InputError):
        defuzzify(interval([0.1], [0.2]), 1.0, -0.1)


@settings(max_examples=200, deadline=None)
@given(instance(), st.floats(0, 2))
def test_popcount_equals_predicted_cardinality(inst, lam):
    y, m_hat, _, L = inst
    k = predicted_cardinality(m_hat, L)
    it2 = build_interval(y, derive_fuzzifiers(m_hat, k, L))
    pred = defuzzify(it2, m_hat, lam)
    assert pred.y_hat.sum() == k == pred.k


@settings(max_examples=200, deadline=None)
@given(instance())
def test_zero_lambda_ranks_like_midpoint(inst):
    y, m_hat, card, L = inst
    it2 = build_interval(y, derive_fuzzifiers(m_hat, card, L))
    np.testing.assert_array_equal(np.argsort(-defuzz_scores(it2, 0.0), kind="stable"),
                                  np.argsort(-it2.midpoint, kind="stable"))


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_confidence_dominance(a, b, c, d, lam):
    # interval A lies entirely at or above interval B
    b_lo, b_up, a_lo, a_up = sorted([a, b, c, d])
    s = defuzz_scores(interval([a_lo, b_lo], [a_up, b_up]), lam)
    assert s[0] >= s[1] - 1e-15


@settings(max_examples=300, deadline=None)
@given(instance(), st.floats(0, 1))
def test_shared_pair_ranking_does_not_depend_on_lambda(inst, lam):
    # with one fuzzifier pair per instance, every score is increasing in y for
    # lambda <= 1, so the top-k set is the same as at lambda = 0
    y, m_hat, card, L = inst
    it2 = build_interval(y, derive_fuzzifiers(m_hat, card, L))
    np.testing.assert_array_equal(defuzzify(it2, m_hat, lam).y_hat, defuzzify(it2, m_hat, 0.0).y_hat)


def test_type1_thresholds():
    y = np.array([0.6, 0.4, 0.55])
    np.testing.assert_array_equal(type1_binarize(y, 2.0).y_hat, [1, 0, 1])
    np.testing.assert_array_equal(type1_binarize(np.array([1.0, 0.99]), 1.2).y_hat, [1, 0])
    np.testing.assert_array_equal(type1_binarize(y, 2.0, total_labels=True).y_hat, [1, 1, 1])
    batch = type1_binarize(np.array([[0.6, 0.4], [0.6, 0.4]]), np.array([1.0, 2.0]))
    np.testing.assert_array_equal(batch.y_hat, [[0, 0], [1, 0]])
