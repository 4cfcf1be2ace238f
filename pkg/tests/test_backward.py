"""Finite-difference checks for every layer's backward pass."""

import numpy as np
import pytest

from emogen.layers import (BatchNorm, Conv2D, Dense, GlobalAvgPool, MaxPool2D,
                           ReLU, SeparableConv2D, Softmax, relu_backward,
                           relu_forward)
from emogen.network import ResidualBlock, Sequential
from emogen.train import grad_check

TOL = 1e-4


def test_relu_backward_convention():
    y, mask = relu_forward(np.array([-1.0, 2.0]))
    grad = relu_backward(np.array([5.0, 5.0]), mask)
    np.testing.assert_array_equal(grad, [0.0, 5.0])
    # gradient at exactly 0 is 0
    _, mask0 = relu_forward(np.array([0.0]))
    np.testing.assert_array_equal(relu_backward(np.array([7.0]), mask0), [0.0])


def test_dense_backward_fd():
    rng = np.random.default_rng(0)
    err = grad_check(Dense(6, 4, rng=rng), (3, 6), seed=1)
    assert err < 1e-6  # linear map: exact up to rounding


def test_conv2d_backward_fd():
    rng = np.random.default_rng(1)
    layer = Conv2D(2, 2, 3, stride=1, padding="valid", rng=rng)
    assert grad_check(layer, (1, 2, 4, 4), seed=2) < TOL


@pytest.mark.parametrize("stride,padding", [(1, "same"), (2, "same"), (2, "valid")])
def test_conv2d_backward_fd_padded_strided(stride, padding):
    rng = np.random.default_rng(2)
    layer = Conv2D(3, 2, 3, stride=stride, padding=padding, rng=rng)
    assert grad_check(layer, (2, 3, 6, 6), seed=3) < TOL


def test_separable_backward_fd():
    rng = np.random.default_rng(3)
    layer = SeparableConv2D(3, 4, 3, stride=1, padding="same", rng=rng)
    assert grad_check(layer, (1, 3, 5, 5), seed=4) < TOL


def test_batchnorm_backward_fd_train_mode():
    layer = BatchNorm(3)
    assert grad_check(layer, (4, 3, 3, 3), seed=5) < TOL


def test_maxpool_backward_fd():
    layer = MaxPool2D(2, 2)
    assert grad_check(layer, (2, 2, 4, 4), seed=6) < TOL


def test_maxpool_same_backward_fd():
    layer = MaxPool2D(3, 2, padding="same")
    assert grad_check(layer, (1, 2, 5, 5), seed=7) < TOL


def test_maxpool_tie_routes_to_first():
    layer = MaxPool2D(2, 2)
    x = np.ones((1, 1, 2, 2))
    y, cache = layer.forward(x)
    grad_in, _ = layer.backward(np.array([[[[1.0]]]]), cache)
    np.testing.assert_array_equal(grad_in, [[[[1.0, 0.0], [0.0, 0.0]]]])


def test_gap_backward_fd():
    assert grad_check(GlobalAvgPool(), (2, 3, 4, 4), seed=8) < 1e-6


def test_softmax_backward_fd():
    assert grad_check(Softmax(), (3, 7), seed=9) < TOL


def test_relu_layer_fd():
    assert grad_check(ReLU(), (2, 3, 4, 4), seed=10) < TOL


def test_residual_block_backward_fd():
    rng = np.random.default_rng(4)
    main = Sequential([
        ("sep", SeparableConv2D(2, 4, 3, padding="same", rng=rng)),
        ("bn", BatchNorm(4)),
        ("relu", ReLU()),
        ("sep2", SeparableConv2D(4, 4, 3, padding="same", rng=rng)),
        ("bn2", BatchNorm(4)),
        ("pool", MaxPool2D(3, 2, padding="same")),
    ])
    shortcut = Sequential([
        ("proj", Conv2D(2, 4, 1, stride=2, padding="same", rng=rng)),
        ("bn", BatchNorm(4)),
    ])
    assert grad_check(ResidualBlock(main, shortcut), (2, 2, 6, 6), seed=11) < TOL


def test_mini_block_fd():
    # sepconv + bn + relu chained, as one unit
    rng = np.random.default_rng(5)
    block = Sequential([
        ("sep", SeparableConv2D(2, 3, 3, padding="same", rng=rng)),
        ("bn", BatchNorm(3)),
        ("relu", ReLU()),
    ])
    assert grad_check(block, (2, 2, 5, 5), seed=12) < TOL


def test_corrupted_backward_is_detected():
    rng = np.random.default_rng(6)

    class BrokenDense(Dense):
        def backward(self, grad_out, cache):
            dx, grads = super().backward(grad_out, cache)
            return dx, {k: -v for k, v in grads.items()}  # sign flip

    err = grad_check(BrokenDense(5, 4, rng=rng), (2, 5), seed=13)
    assert err > 0.1
