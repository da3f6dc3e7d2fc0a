"""Tensor op forward values, backward rules, and the gradient checker."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltaprompt import autodiff as ad
from deltaprompt.errors import NumericError, ShapeError, TapeError


# ---------------------------------------------------------------------------
# forward values


def test_cosine_of_orthogonal_unit_vectors_is_zero():
    a = ad.constant([1.0, 0.0])
    b = ad.constant([0.0, 1.0])
    assert ad.cosine_similarity(a, b).item() == 0.0


def test_euclidean_distance_to_self_is_zero():
    v = ad.constant([0.3, -1.2, 4.0])
    assert ad.euclidean_distance(v, v).item() == 0.0


def test_softmax_of_constant_vector_is_uniform():
    s = ad.softmax(ad.constant([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(s.data, [1 / 3, 1 / 3, 1 / 3], rtol=0, atol=1e-15)


def test_relu_clips_negatives():
    y = ad.relu(ad.constant([-2.0, 0.5]))
    np.testing.assert_array_equal(y.data, [0.0, 0.5])


def test_matmul_shapes():
    A = ad.constant(np.arange(6.0).reshape(2, 3))
    B = ad.constant(np.arange(12.0).reshape(3, 4))
    v = ad.constant([1.0, 2.0, 3.0])
    assert ad.matmul(A, B).shape == (2, 4)
    assert ad.matmul(A, v).shape == (2,)
    assert ad.matmul(v, B).shape == (4,)
    assert ad.matmul(v, v).item() == pytest.approx(14.0)


def test_concat_slice_round_trip():
    a = ad.constant([1.0, 2.0])
    b = ad.constant([3.0, 4.0, 5.0])
    joined = ad.concat([a, b])
    np.testing.assert_array_equal(joined.data, [1, 2, 3, 4, 5])
    back = ad.slice_range(joined, 2, 5)
    np.testing.assert_array_equal(back.data, b.data)


def test_stack_rows_and_row():
    rows = [ad.constant([1.0, 2.0]), ad.constant([3.0, 4.0])]
    m = ad.stack_rows(rows)
    assert m.shape == (2, 2)
    np.testing.assert_array_equal(ad.row(m, 1).data, [3.0, 4.0])


# ---------------------------------------------------------------------------
# backward rules


def test_grad_of_x_dot_x_at_3_is_6():
    x = ad.parameter([3.0])
    loss = ad.matmul(x, x)
    ad.backward(loss)
    np.testing.assert_allclose(x.grad, [6.0])


def test_mean_gradient_is_one_over_n():
    x = ad.parameter(np.arange(5.0))
    ad.backward(ad.mean(x))
    np.testing.assert_allclose(x.grad, np.full(5, 0.2))


def test_relu_gradient_zero_on_negative_side():
    x = ad.parameter([-2.0])
    ad.backward(ad.sum_all(ad.relu(x)))
    np.testing.assert_array_equal(x.grad, [0.0])


def test_gradient_accumulates_over_shared_use():
    x = ad.parameter([1.0, 2.0])
    # x used twice: d/dx sum(x + x) = 2
    ad.backward(ad.sum_all(ad.add(x, x)))
    np.testing.assert_allclose(x.grad, [2.0, 2.0])


def test_softmax_log_gives_softmax_minus_onehot():
    logits = ad.parameter([0.2, -1.0, 0.7])
    p = ad.softmax(logits)
    loss = ad.scalar_mul(ad.log(ad.element(p, 2)), -1.0)
    ad.backward(loss)
    expected = np.exp(logits.data) / np.exp(logits.data).sum()
    expected[2] -= 1.0
    np.testing.assert_allclose(logits.grad, expected, atol=1e-12)


def test_frozen_operand_receives_no_gradient():
    w = ad.constant(np.eye(2))
    x = ad.parameter([1.0, 2.0])
    ad.backward(ad.sum_all(ad.matmul(w, x)))
    assert w.grad is None
    assert x.grad is not None


def test_backward_linearity():
    rng = np.random.default_rng(7)
    x = ad.parameter(rng.normal(size=4))

    def f():
        return ad.sum_all(ad.tanh(x))

    def g():
        return ad.l2_norm(x)

    ad.backward(f())
    gf = x.grad.copy()
    x.grad = None
    ad.backward(g())
    gg = x.grad.copy()
    x.grad = None
    a, b = 0.7, -2.5
    ad.backward(ad.add(ad.scalar_mul(f(), a), ad.scalar_mul(g(), b)))
    np.testing.assert_allclose(x.grad, a * gf + b * gg, atol=1e-10)


# ---------------------------------------------------------------------------
# finite differences


def test_two_layer_tanh_net_passes_gradient_check():
    rng = np.random.default_rng(0)
    w1 = ad.parameter(rng.normal(scale=0.5, size=(4, 3)))
    w2 = ad.parameter(rng.normal(scale=0.5, size=(1, 4)))
    x = ad.constant(rng.normal(size=3))

    def f():
        return ad.sum_all(ad.tanh(ad.matmul(w2, ad.tanh(ad.matmul(w1, x)))))

    res = ad.finite_difference_check(f, [w1, w2])
    assert res.max_rel_error < 1e-4


def test_gradient_check_flags_kink():
    x = ad.parameter([0.0, 1.0])

    def f():
        return ad.sum_all(ad.relu(x))

    res = ad.finite_difference_check(f, [x])
    assert res.near_kink


def test_gradient_check_rejects_nondeterministic_f():
    rng = np.random.default_rng(3)
    x = ad.parameter([1.0])

    def f():
        return ad.scalar_mul(ad.sum_all(x), float(rng.normal()))

    with pytest.raises(NumericError):
        ad.finite_difference_check(f, [x])


# ---------------------------------------------------------------------------
# invariants via hypothesis

finite_vec = st.lists(
    st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=2, max_size=8
)


@settings(max_examples=60, deadline=None)
@given(finite_vec)
def test_softmax_is_a_distribution(v):
    s = ad.softmax(ad.constant(v))
    assert abs(float(s.data.sum()) - 1.0) < 1e-12
    assert (s.data > 0).all()


@settings(max_examples=60, deadline=None)
@given(finite_vec, finite_vec)
def test_cosine_similarity_bounded(a, b):
    n = min(len(a), len(b))
    a, b = np.array(a[:n]), np.array(b[:n])
    if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
        return
    c = ad.cosine_similarity(ad.constant(a), ad.constant(b)).item()
    assert -1.0 - 1e-12 <= c <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# errors and determinism


def test_add_shape_mismatch_names_op():
    with pytest.raises(ShapeError, match="add"):
        ad.add(ad.constant([1.0]), ad.constant([1.0, 2.0]))


def test_matmul_shape_mismatch_names_op():
    with pytest.raises(ShapeError, match="matmul"):
        ad.matmul(ad.constant(np.ones((2, 3))), ad.constant(np.ones((2, 3))))


def test_backward_requires_scalar_loss():
    x = ad.parameter([1.0, 2.0])
    y = ad.add(x, x)
    with pytest.raises(ShapeError, match="scalar"):
        ad.backward(y)


def test_backward_twice_is_stale():
    x = ad.parameter([1.0])
    loss = ad.sum_all(x)
    ad.backward(loss)
    with pytest.raises(TapeError):
        ad.backward(loss)


def test_no_grad_suppresses_recording():
    x = ad.parameter([1.0])
    with ad.no_grad():
        y = ad.sum_all(x)
    assert not y.requires_grad
    with pytest.raises(TapeError):
        ad.backward(y)


def test_non_finite_input_rejected():
    with pytest.raises(NumericError):
        ad.Tensor([np.inf])


def test_forward_is_deterministic_bitwise():
    rng = np.random.default_rng(11)
    data = rng.normal(size=(3, 3))
    v = rng.normal(size=3)

    def run():
        m = ad.constant(data)
        x = ad.constant(v)
        return ad.softmax(ad.tanh(ad.matmul(m, x))).data.tobytes()

    assert run() == run()
