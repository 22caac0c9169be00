"""
🧮 Network primitive tests - loop oracles and finite-difference gradients
"""

import math

import numpy as np
import pytest

from src.core.enums import Mode, Padding
from src.core.nn import (
    ELU,
    AvgPool2d,
    BatchNorm,
    Conv2d,
    CrossEntropyLoss,
    Dense,
    Dropout,
    avg_pool2d,
    conv2d,
    conv2d_backward,
    dropout,
    dropout_mask,
    elu,
    same_padding,
    softmax,
    softmax_cross_entropy,
)
from src.utils.errors import InvalidArgumentError, InvalidStateError
from tests.conftest import numeric_grad


def loop_conv(x, kernels, bias, padding):
    b, cin, h, w = x.shape
    cout, _, kh, kw = kernels.shape
    if padding is Padding.SAME:
        (pt, pb), (pl, pr) = same_padding(kh), same_padding(kw)
    else:
        pt = pb = pl = pr = 0
    xp = np.zeros((b, cin, h + pt + pb, w + pl + pr))
    xp[:, :, pt : pt + h, pl : pl + w] = x
    out_h, out_w = xp.shape[2] - kh + 1, xp.shape[3] - kw + 1
    out = np.zeros((b, cout, out_h, out_w))
    for n in range(b):
        for o in range(cout):
            for i in range(out_h):
                for j in range(out_w):
                    out[n, o, i, j] = np.sum(xp[n, :, i : i + kh, j : j + kw] * kernels[o]) + bias[o]
    return out


@pytest.mark.parametrize("kernel", [1, 3, 4, 8, 9])
@pytest.mark.parametrize("padding", [Padding.SAME, Padding.VALID])
def test_conv_matches_loops(kernel, padding, rng):
    x = rng.normal(size=(2, 3, 10, 12))
    kernels = rng.normal(size=(4, 3, kernel, kernel))
    bias = rng.normal(size=4)
    out = conv2d(x, kernels, bias, padding)
    np.testing.assert_allclose(out, loop_conv(x, kernels, bias, padding), rtol=1e-12, atol=1e-12)
    if padding is Padding.SAME:
        assert out.shape == (2, 4, 10, 12)


def test_even_kernels_pad_less_before_than_after():
    assert same_padding(8) == (3, 4)
    assert same_padding(9) == (4, 4)
    x = np.zeros((1, 1, 5, 5))
    x[0, 0, 0, 0] = 1.0
    kernels = np.zeros((1, 1, 2, 2))
    kernels[0, 0, 0, 0] = 1.0
    # padding goes after, so output (0, 0) starts on the input corner rather than on padding
    assert conv2d(x, kernels, np.zeros(1))[0, 0, 0, 0] == 1.0


def test_conv_rejects_oversized_kernels_and_bad_shapes(rng):
    with pytest.raises(InvalidArgumentError):
        conv2d(rng.normal(size=(1, 1, 3, 3)), rng.normal(size=(1, 1, 5, 5)), np.zeros(1), Padding.VALID)
    with pytest.raises(InvalidArgumentError):
        conv2d(rng.normal(size=(1, 2, 3, 3)), rng.normal(size=(1, 1, 3, 3)), np.zeros(1))
    with pytest.raises(InvalidArgumentError):
        conv2d(rng.normal(size=(1, 1, 3, 3)), rng.normal(size=(1, 1, 3, 3)), np.zeros(2))


@pytest.mark.parametrize("seed", range(20))
def test_conv_gradients(seed):
    rng = np.random.default_rng(seed)
    kernel = (2, 3, 4, 5)[seed % 4]
    padding = Padding.SAME if seed % 2 == 0 else Padding.VALID
    x = rng.normal(size=(2, 2, 6, 7))
    kernels = rng.normal(size=(3, 2, kernel, kernel))
    bias = rng.normal(size=3)
    probe = rng.normal(size=conv2d(x, kernels, bias, padding).shape)

    def loss() -> float:
        return float(np.sum(conv2d(x, kernels, bias, padding) * probe))

    dx, dk, db = conv2d_backward(probe, x, kernels, padding)
    for _ in range(4):
        i = tuple(rng.integers(0, n) for n in x.shape)
        assert dx[i] == pytest.approx(numeric_grad(loss, x, i), rel=1e-4, abs=1e-7)
        k = tuple(rng.integers(0, n) for n in kernels.shape)
        assert dk[k] == pytest.approx(numeric_grad(loss, kernels, k), rel=1e-4, abs=1e-7)
    assert db[1] == pytest.approx(numeric_grad(loss, bias, (1,)), rel=1e-4, abs=1e-7)


def test_elu_values():
    x = np.array([-2.0, -1e-9, 0.0, 0.5, 3.0])
    np.testing.assert_allclose(elu(x), [math.expm1(-2.0), math.expm1(-1e-9), 0.0, 0.5, 3.0], rtol=1e-15)
    assert elu(np.array([-1e4]))[0] == -1.0


def test_average_pooling_floors_odd_extents(rng):
    x = rng.normal(size=(1, 2, 5, 7))
    out = avg_pool2d(x, (2, 2))
    assert out.shape == (1, 2, 2, 3)
    assert out[0, 1, 1, 2] == pytest.approx(np.mean(x[0, 1, 2:4, 4:6]), rel=1e-14)
    with pytest.raises(InvalidArgumentError):
        avg_pool2d(np.zeros((1, 1, 1, 5)), (2, 2))


@pytest.mark.parametrize("seed", range(20))
def test_layer_gradients(seed):
    """Pooling, ELU, dense and batch norm (train and eval) against central differences"""
    rng = np.random.default_rng(seed)
    layers = [
        (AvgPool2d("pool", (2, 2)), (3, 2, 5, 6)),
        (ELU("elu"), (3, 4)),
        (Dense("fc", 4, 3, rng), (3, 4)),
        (BatchNorm("bn", 2), (4, 2, 3, 3)),
        (BatchNorm("bn1d", 4), (5, 4)),
    ]
    for layer, shape in layers:
        if isinstance(layer, BatchNorm):
            layer.gain.value[...] = rng.normal(size=layer.gain.shape)
            layer.shift.value[...] = rng.normal(size=layer.shift.shape)
        for mode in (Mode.TRAIN, Mode.EVAL):
            x = rng.normal(size=shape)
            probe = rng.normal(size=layer.forward(x, mode).shape)

            def loss() -> float:
                return float(np.sum(layer.forward(x, mode) * probe))

            loss()
            for grid in layer.params():
                grid.zero_grad()
            dx = layer.backward(probe)
            for _ in range(3):
                i = tuple(rng.integers(0, n) for n in shape)
                assert dx[i] == pytest.approx(numeric_grad(loss, x, i), rel=1e-4, abs=1e-7), layer.name
            for grid in layer.params():
                g = tuple(rng.integers(0, n) for n in grid.shape)
                assert grid.grad[g] == pytest.approx(numeric_grad(loss, grid.value, g), rel=1e-4, abs=1e-7)


def test_batch_norm_statistics():
    bn = BatchNorm("bn", 2)
    x = np.arange(24, dtype=float).reshape(3, 2, 2, 2)
    y = bn.forward(x, Mode.TRAIN)
    np.testing.assert_allclose(y.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
    np.testing.assert_allclose(y.var(axis=(0, 2, 3)), 1.0, rtol=1e-4)
    batch_mean = x.mean(axis=(0, 2, 3))
    unbiased = x.var(axis=(0, 2, 3), ddof=1)
    np.testing.assert_allclose(bn.running_mean.value, 0.1 * batch_mean)
    np.testing.assert_allclose(bn.running_var.value, 0.9 + 0.1 * unbiased)

    frozen = bn.running_mean.value.copy()
    out = bn.forward(x, Mode.EVAL)
    np.testing.assert_array_equal(bn.running_mean.value, frozen)
    expected = (x - frozen[None, :, None, None]) / np.sqrt(bn.running_var.value + 1e-5)[None, :, None, None]
    np.testing.assert_allclose(out, expected, rtol=1e-12)

    with pytest.raises(InvalidArgumentError):
        bn.forward(x[:1], Mode.TRAIN)


def test_dropout_mask_and_modes(rng):
    mask = dropout_mask((200, 200), 0.25, rng)
    assert set(np.unique(mask)) <= {0.0, 1.0 / 0.75}
    assert abs(np.mean(mask == 0) - 0.25) < 0.01
    x = rng.normal(size=(4, 5))
    np.testing.assert_array_equal(dropout(x, 0.25, Mode.EVAL, rng), x)
    np.testing.assert_array_equal(dropout(x, 0.0, Mode.TRAIN, rng), x)
    for p in (-0.1, 1.0):
        with pytest.raises(InvalidArgumentError):
            dropout(x, p, Mode.TRAIN, rng)
    layer = Dropout("drop", 0.5, rng)
    y = layer.forward(x, Mode.TRAIN)
    np.testing.assert_array_equal(layer.backward(np.ones_like(x)), (y != 0) * 2.0)


def test_softmax_is_stable_and_normalised():
    logits = np.array([[1e4, 0.0, -1e4], [3.0, 3.0, 3.0]])
    probs = softmax(logits, axis=1)
    assert np.all(np.isfinite(probs))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(probs[1], 1 / 3)


def test_uniform_logits_cost_log_of_class_count():
    loss, probs = softmax_cross_entropy(np.zeros((4, 13)), [0, 5, 12, 3])
    assert abs(loss - math.log(13)) < 1e-10
    np.testing.assert_allclose(probs, 1 / 13)


def test_cross_entropy_gradient(rng):
    logits = rng.normal(size=(4, 5))
    targets = np.array([0, 4, 2, 2])
    head = CrossEntropyLoss()
    head.forward(logits, targets)
    grad = head.backward()

    def loss() -> float:
        return softmax_cross_entropy(logits, targets)[0]

    for i in [(0, 0), (1, 4), (3, 1)]:
        assert grad[i] == pytest.approx(numeric_grad(loss, logits, i), rel=1e-6, abs=1e-9)
    with pytest.raises(InvalidStateError):
        head.backward()
    with pytest.raises(InvalidArgumentError):
        softmax_cross_entropy(logits, [0, 5, 1, 1])


def test_backward_without_forward_is_an_error(rng):
    layer = Conv2d("conv", 1, 1, (3, 3), rng)
    with pytest.raises(InvalidStateError):
        layer.backward(np.zeros((1, 1, 4, 4)))


def test_dropout_drop_rate_concentrates_over_a_million_draws():
    mask = dropout_mask((1000, 1000), 0.25, np.random.default_rng(0))
    assert abs(np.mean(mask == 0) - 0.25) < 0.005


def test_dropout_train_output_averages_to_eval_output():
    rng = np.random.default_rng(1)
    x = np.full(1_000_000, 2.5)
    train = dropout(x, 0.25, Mode.TRAIN, rng)
    assert np.mean(train) == pytest.approx(np.mean(dropout(x, 0.25, Mode.EVAL, rng)), rel=0.01)
