import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from twotier.ensemble import (
    FusionWeights,
    average_instances,
    bce_grad_y,
    bce_loss,
    fuse,
    fuse_batch,
    fusion_gradient,
    fusion_gradient_batch,
    sigmoid,
    softmax_weights,
    uniform_init,
)
from twotier.errors import EmptyInput, LengthMismatch

from .oracles import central_diff, ref_bce, ref_fused_loss, ref_softmax

probs = st.floats(0.0, 1.0)
logits = st.floats(-30.0, 30.0)


def prob_vectors(n):
    return hnp.arrays(np.float64, n, elements=probs)


# sigmoid

@pytest.mark.parametrize("z, want", [(0.0, 0.5), (math.log(3), 0.75), (-math.log(3), 0.25)])
def test_sigmoid_closed_forms(z, want):
    assert sigmoid(z) == pytest.approx(want, abs=1e-15)


def test_sigmoid_extremes_do_not_overflow():
    out = sigmoid(np.array([-1000.0, 1000.0]))
    assert out[0] == 0.0 and out[1] == 1.0


@given(logits)
def test_sigmoid_symmetry(z):
    assert sigmoid(z) + sigmoid(-z) == pytest.approx(1.0, abs=1e-15)


# tier 1

def test_average_instances_examples():
    assert average_instances([0.2, 0.4, 0.6]) == pytest.approx(0.4, abs=1e-15)
    assert average_instances(sigmoid(np.array([0.0, math.log(3), -math.log(3)]))) == pytest.approx(0.5, abs=1e-15)


@given(probs)
def test_average_of_identical_is_identity(p):
    assert average_instances([p, p, p]) == p


@given(prob_vectors(st.integers(1, 8)))
def test_average_stays_in_hull(s):
    m = average_instances(s)
    assert s.min() <= m <= s.max()


def test_average_empty():
    with pytest.raises(EmptyInput):
        average_instances([])


# softmax

def test_softmax_examples():
    np.testing.assert_allclose(softmax_weights([0, 0, 0]), [1 / 3] * 3, rtol=0, atol=1e-15)
    np.testing.assert_allclose(softmax_weights([7.5] * 3), [1 / 3] * 3, rtol=0, atol=1e-15)
    np.testing.assert_allclose(softmax_weights(np.log([1, 2, 3])), [1 / 6, 2 / 6, 3 / 6], rtol=0, atol=1e-15)


@given(hnp.arrays(np.float64, st.integers(1, 6), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_softmax_simplex_and_shift(w, c):
    a = softmax_weights(w)
    assert np.all(a > 0)
    assert abs(a.sum() - 1) <= 1e-12
    np.testing.assert_allclose(softmax_weights(w + c), a, rtol=0, atol=1e-12)


def test_softmax_large_logits_stay_finite():
    a = softmax_weights([1000.0, 0.0, -1000.0])
    assert np.all(np.isfinite(a)) and a[0] == pytest.approx(1.0)


# tier 2

def test_fuse_examples():
    assert fuse([1 / 3] * 3, [0.9, 0.6, 0.3]) == pytest.approx(0.6, abs=1e-15)
    assert fuse([1 / 6, 2 / 6, 3 / 6], [0.0, 0.5, 1.0]) == pytest.approx(4 / 6, abs=1e-15)


@given(hnp.arrays(np.float64, 3, elements=st.floats(-20, 20)), probs)
def test_fuse_constant_predictions(w, q):
    assert fuse(softmax_weights(w), [q, q, q]) == q


@given(hnp.arrays(np.float64, 4, elements=st.floats(-20, 20)), prob_vectors(4))
def test_fuse_is_convex(w, p):
    y = fuse(softmax_weights(w), p)
    assert p.min() <= y <= p.max()


def test_fuse_length_mismatch():
    with pytest.raises(LengthMismatch):
        fuse([0.5, 0.5], [0.1, 0.2, 0.3])


# loss

def test_bce_examples():
    assert bce_loss(0.5, 1) == pytest.approx(math.log(2), abs=1e-12)
    assert bce_loss(0.5, 0) == pytest.approx(math.log(2), abs=1e-12)
    assert bce_loss(1.0, 1) == pytest.approx(-math.log(1 - 1e-7), rel=1e-9)
    assert math.isfinite(bce_loss(0.0, 1))
    assert bce_grad_y(0.5, 1) == pytest.approx(-2.0, abs=1e-12)
    assert bce_grad_y(0.5, 0) == pytest.approx(2.0, abs=1e-12)


@given(st.floats(1e-4, 1 - 1e-4), st.sampled_from([0, 1]))
def test_bce_grad_matches_finite_difference(y, t):
    fd = central_diff(lambda v: ref_bce(float(v[0]), t), [y], h=1e-8)[0]
    assert bce_grad_y(y, t) == pytest.approx(fd, rel=1e-5)


# fusion gradient

def test_fusion_gradient_hand_example():
    g = fusion_gradient([0, 0, 0], [1, 0, 0], 1.0)
    np.testing.assert_allclose(g.d_w, [2 / 9, -1 / 9, -1 / 9], rtol=0, atol=1e-15)
    # and against differences of L(w) = y(w)
    fd = central_diff(lambda w: float(ref_softmax(w) @ np.array([1.0, 0, 0])), np.zeros(3))
    np.testing.assert_allclose(g.d_w, fd, rtol=1e-6, atol=1e-9)


@given(hnp.arrays(np.float64, 3, elements=st.floats(-10, 10)), probs, st.floats(-5, 5))
def test_fusion_gradient_vanishes_for_equal_predictions(w, q, dl):
    np.testing.assert_allclose(fusion_gradient(w, [q] * 3, dl).d_w, 0.0, atol=1e-15)


def test_fusion_gradient_matches_fd_on_random_draws(rng):
    for _ in range(100):
        A = int(rng.integers(2, 6))
        w, p, t = rng.normal(0, 2, A), rng.random(A), int(rng.integers(0, 2))
        y = float(softmax_weights(w) @ p)
        g = fusion_gradient(w, p, bce_grad_y(y, t)).d_w
        fd = central_diff(lambda v: ref_fused_loss(v, p, t), w)
        assert np.all(np.abs(g - fd) <= np.maximum(1e-6 * np.abs(g), 1e-9))


@given(hnp.arrays(np.float64, 5, elements=st.floats(-10, 10)), prob_vectors(5), st.floats(-10, 10))
def test_fusion_gradient_sums_to_zero(w, p, dl):
    assert abs(fusion_gradient(w, p, dl).d_w.sum()) <= 1e-10


def test_batch_gradient_is_sum_of_sample_gradients(rng):
    w, P, d = rng.normal(size=3), rng.random((7, 3)), rng.normal(size=7)
    want = sum(fusion_gradient(w, P[k], d[k]).d_w for k in range(7))
    np.testing.assert_allclose(fusion_gradient_batch(w, P, d), want, rtol=1e-12, atol=1e-15)


def test_fusion_weights_init_and_predict(rng):
    fw = FusionWeights.uniform(3)
    np.testing.assert_array_equal(fw.w, uniform_init(3))
    np.testing.assert_allclose(fw.alpha, 1 / 3, atol=1e-15)
    P = rng.random((5, 3))
    np.testing.assert_allclose(fw.predict(P), P.mean(axis=1), atol=1e-15)
    np.testing.assert_allclose(fuse_batch(fw.alpha, P), fw.predict(P))
    with pytest.raises(ValueError):
        FusionWeights([0.0, math.nan])
