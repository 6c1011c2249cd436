"""Forward values and gradient checks for every graph op."""

import numpy as np
import pytest

from phonseg import autodiff as ad
from phonseg.errors import DimensionError

from gradcheck import check_gradients


def randp(np_rng, rows, cols):
    return ad.parameter(np_rng.uniform(-2.0, 2.0, size=(rows, cols)))


# ---------------------------------------------------------------------------
# forward values


def test_matmul_identity():
    m = ad.constant([[1.5, -2.0], [0.25, 4.0]])
    eye = ad.constant(np.eye(2))
    assert np.array_equal(ad.matmul(eye, m).value, m.value)


def test_matmul_hand_case():
    a = ad.constant([[1.0, 2.0], [3.0, 4.0]])
    b = ad.constant([[1.0], [1.0]])
    assert np.array_equal(ad.matmul(a, b).value, [[3.0], [7.0]])


def test_matmul_shape_error():
    with pytest.raises(DimensionError):
        ad.matmul(ad.constant(np.ones((2, 3))), ad.constant(np.ones((2, 3))))


def test_binary_ops_require_equal_shapes():
    a, b = ad.constant(np.ones((2, 2))), ad.constant(np.ones((2, 3)))
    for op in (ad.add, ad.sub, ad.mul):
        with pytest.raises(DimensionError):
            op(a, b)


def test_sigmoid_at_zero():
    assert ad.sigmoid(ad.constant([[0.0]])).value[0, 0] == pytest.approx(0.5)


def test_tanh_gradient_at_zero_is_one():
    x = ad.parameter([[0.0]])
    ad.backward(ad.sum_all(ad.tanh(x)))
    assert x.grad[0, 0] == pytest.approx(1.0)


def test_softmax_uniform_row():
    y = ad.softmax_rows(ad.constant([[0.0, 0.0, 0.0]])).value
    assert np.allclose(y, 1.0 / 3.0)


def test_softmax_overflow_safe():
    y = ad.softmax_rows(ad.constant([[1000.0, 0.0]])).value
    assert np.all(np.isfinite(y))
    assert y[0, 0] == pytest.approx(1.0)
    assert y[0, 1] == pytest.approx(0.0, abs=1e-12)


def test_softmax_rows_sum_to_one(np_rng):
    x = ad.constant(np_rng.uniform(-5, 5, size=(7, 9)))
    sums = ad.softmax_rows(x).value.sum(axis=1)
    assert np.allclose(sums, 1.0, atol=1e-6)


def test_log_softmax_never_neg_inf(np_rng):
    x = ad.constant(np_rng.uniform(-800, 800, size=(5, 4)))
    y = ad.log_softmax_rows(x).value
    assert np.all(np.isfinite(y))


def test_shared_subexpression_accumulates():
    x = ad.parameter([[3.0]])
    ad.backward(ad.sum_all(ad.add(x, x)))
    assert x.grad[0, 0] == pytest.approx(2.0)


def test_conv1d_delta_kernel_is_identity(np_rng):
    x = ad.constant(np_rng.normal(size=(6, 3)))
    w = np.zeros((9, 3))
    w[3:6] = np.eye(3)  # center tap
    y = ad.conv1d(x, ad.constant(w), ad.constant(np.zeros((1, 3))), kernel=3)
    assert np.allclose(y.value, x.value)


def test_lstm_zero_everything_gives_zero_h():
    x = ad.constant(np.zeros((1, 4)))
    h = ad.constant(np.zeros((1, 3)))
    c = ad.constant(np.zeros((1, 3)))
    wx = ad.constant(np.zeros((4, 12)))
    wh = ad.constant(np.zeros((3, 12)))
    b = ad.constant(np.zeros((1, 12)))
    out = ad.lstm_cell(x, h, c, wx, wh, b)
    assert np.allclose(out.value[:, :3], 0.0)


def test_backward_requires_scalar_root():
    with pytest.raises(DimensionError):
        ad.backward(ad.constant(np.ones((2, 2))))


def test_bce_perfect_prediction_tends_to_zero():
    logits = ad.constant([[20.0], [-20.0]])
    loss = ad.bce_with_logits(logits, [[1.0], [0.0]])
    assert loss.value[0, 0] < 1e-8


# ---------------------------------------------------------------------------
# gradients vs central finite differences


def test_grad_matmul(np_rng):
    a, b = randp(np_rng, 3, 4), randp(np_rng, 4, 2)
    check_gradients(
        lambda: ad.sum_all(ad.matmul(a, b)), [a, b], context="matmul"
    )


@pytest.mark.parametrize("op", [ad.add, ad.sub, ad.mul])
def test_grad_binary(np_rng, op):
    a, b = randp(np_rng, 3, 3), randp(np_rng, 3, 3)
    check_gradients(
        lambda: ad.sum_all(op(a, b)), [a, b], context=op.__name__
    )


@pytest.mark.parametrize("op", [ad.tanh, ad.sigmoid, ad.relu, ad.abs_, ad.square])
def test_grad_unary(np_rng, op):
    x = randp(np_rng, 4, 3)
    # keep relu/abs kinks away from the probe points
    x.value[np.abs(x.value) < 0.05] += 0.1
    weights = ad.constant(np_rng.normal(size=x.value.shape))
    check_gradients(
        lambda: ad.sum_all(ad.mul(op(x), weights)), [x], context=op.__name__
    )


@pytest.mark.parametrize("op", [ad.softmax_rows, ad.log_softmax_rows])
def test_grad_softmaxes(np_rng, op):
    x = randp(np_rng, 3, 5)
    weights = ad.constant(np_rng.normal(size=(3, 5)))
    check_gradients(
        lambda: ad.sum_all(ad.mul(op(x), weights)), [x], context=op.__name__
    )


def test_grad_add_bias(np_rng):
    x, b = randp(np_rng, 4, 3), randp(np_rng, 1, 3)
    w = ad.constant(np_rng.normal(size=(4, 3)))
    check_gradients(
        lambda: ad.sum_all(ad.mul(ad.add_bias(x, b), w)), [x, b], context="add_bias"
    )


def test_grad_layout_ops(np_rng):
    a, b = randp(np_rng, 2, 3), randp(np_rng, 2, 3)
    w = ad.constant(np_rng.normal(size=(4, 3)))

    def build():
        stacked = ad.concat_rows(a, b)  # 4x3
        sliced = ad.slice_rows(stacked, 1, 4)  # 3x3
        wide = ad.concat_cols(sliced, ad.slice_cols(sliced, 2, 3))  # 3x4
        return ad.sum_all(ad.mul(wide, ad.transpose(w)))

    check_gradients(build, [a, b], context="layout")


def test_grad_stack_and_slices(np_rng):
    x = randp(np_rng, 5, 4)
    w = ad.constant(np_rng.normal(size=(5, 4)))

    def build():
        rows = [ad.slice_rows(x, t, t + 1) for t in range(5)]
        re = ad.stack_rows(rows)
        return ad.sum_all(ad.mul(re, w))

    check_gradients(build, [x], context="stack/slice")


def test_grad_transpose_and_scale(np_rng):
    x = randp(np_rng, 3, 2)
    w = ad.constant(np_rng.normal(size=(2, 3)))
    check_gradients(
        lambda: ad.sum_all(ad.mul(ad.scale(ad.transpose(x), -1.7), w)),
        [x],
        context="transpose/scale",
    )


def test_grad_mean_all(np_rng):
    x = randp(np_rng, 3, 4)
    check_gradients(lambda: ad.mean_all(x), [x], context="mean_all")


def test_grad_embed(np_rng):
    table = randp(np_rng, 6, 3)
    ids = np.array([1, 1, 4, 0])
    w = ad.constant(np_rng.normal(size=(4, 3)))
    check_gradients(
        lambda: ad.sum_all(ad.mul(ad.embed(table, ids), w)), [table], context="embed"
    )


def test_grad_conv1d(np_rng):
    x = randp(np_rng, 6, 3)
    w = randp(np_rng, 9, 4)
    b = randp(np_rng, 1, 4)
    mixer = ad.constant(np_rng.normal(size=(6, 4)))
    check_gradients(
        lambda: ad.sum_all(ad.mul(ad.conv1d(x, w, b, 3), mixer)),
        [x, w, b],
        context="conv1d",
    )


def test_grad_lstm_cell(np_rng):
    x = randp(np_rng, 1, 4)
    h = randp(np_rng, 1, 3)
    c = randp(np_rng, 1, 3)
    wx = randp(np_rng, 4, 12)
    wh = randp(np_rng, 3, 12)
    b = randp(np_rng, 1, 12)
    w = ad.constant(np_rng.normal(size=(1, 6)))
    check_gradients(
        lambda: ad.sum_all(ad.mul(ad.lstm_cell(x, h, c, wx, wh, b), w)),
        [x, h, c, wx, wh, b],
        context="lstm_cell",
    )


def test_grad_bce(np_rng):
    logits = randp(np_rng, 5, 1)
    targets = (np_rng.random((5, 1)) > 0.5).astype(float)
    check_gradients(
        lambda: ad.bce_with_logits(logits, targets), [logits], context="bce"
    )


def test_grad_mse_l1(np_rng):
    pred = randp(np_rng, 3, 4)
    target = np_rng.normal(size=(3, 4))
    check_gradients(lambda: ad.mse(pred, target), [pred], context="mse")
    pred2 = randp(np_rng, 3, 4)
    pred2.value[np.abs(pred2.value - target) < 0.05] += 0.1
    check_gradients(lambda: ad.l1(pred2, target), [pred2], context="l1")
