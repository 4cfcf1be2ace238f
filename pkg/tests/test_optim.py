import math

import numpy as np
import pytest

from emogen.errors import ConfigError, LabelError, ShapeError
from emogen.layers import softmax_backward, softmax_forward
from emogen.optim import (AdamState, TrainConfig, adam_step, cross_entropy,
                          cross_entropy_prob_grad)
from oracles import cross_entropy_direct, softmax_direct


def test_cross_entropy_perfect_prediction():
    probs = np.array([[0.0, 1.0, 0.0]])
    loss, _ = cross_entropy(probs, [1])
    assert loss == 0.0


def test_cross_entropy_uniform_seven():
    probs = np.full((4, 7), 1 / 7)
    loss, _ = cross_entropy(probs, [0, 3, 5, 6])
    assert math.isclose(loss, math.log(7), rel_tol=1e-9)


def test_cross_entropy_vs_direct_sum():
    rng = np.random.default_rng(0)
    probs = softmax_direct(rng.standard_normal((8, 7)))
    targets = rng.integers(0, 7, size=8)
    loss, grad = cross_entropy(probs, targets)
    assert math.isclose(loss, cross_entropy_direct(probs, targets), rel_tol=1e-6)
    onehot = np.zeros_like(probs)
    onehot[np.arange(8), targets] = 1.0
    np.testing.assert_allclose(grad, (probs - onehot) / 8, atol=1e-12)


def test_cross_entropy_label_out_of_range():
    with pytest.raises(LabelError):
        cross_entropy(np.full((2, 3), 1 / 3), [0, 3])


def test_fused_grad_equals_prob_grad_through_softmax():
    # (softmax - onehot)/N must equal the prob-space gradient pushed
    # through the softmax jacobian
    rng = np.random.default_rng(1)
    z = rng.standard_normal((5, 7))
    p, cache = softmax_forward(z)
    targets = rng.integers(0, 7, size=5)
    _, fused = cross_entropy(p, targets)
    _, dprobs = cross_entropy_prob_grad(p, targets)
    composed = softmax_backward(dprobs, cache)
    np.testing.assert_allclose(composed, fused, atol=1e-6)


def test_adam_zero_gradient_is_noop():
    cfg = TrainConfig(task="emotion", epochs=1)
    params = {"w": np.array([1.0, -2.0, 3.0], dtype=np.float32)}
    state = AdamState.for_params(params)
    before = params["w"].copy()
    for _ in range(3):
        adam_step(params, {"w": np.zeros(3, np.float32)}, state, cfg)
    np.testing.assert_array_equal(params["w"], before)
    assert state.t == 3


def test_adam_first_step_is_signed_lr():
    cfg = TrainConfig(task="emotion", epochs=1, learning_rate=0.01)
    params = {"w": np.zeros(4, dtype=np.float64)}
    state = AdamState.for_params(params)
    g = np.array([0.3, -0.7, 2.0, -0.001])
    adam_step(params, {"w": g}, state, cfg)
    np.testing.assert_allclose(params["w"], -0.01 * np.sign(g), rtol=1e-4)


def test_adam_three_steps_scalar_oracle():
    cfg = TrainConfig(task="emotion", epochs=1, learning_rate=0.1,
                      beta1=0.9, beta2=0.999, adam_epsilon=1e-8)
    params = {"w": np.array([0.5], dtype=np.float64)}
    state = AdamState.for_params(params)
    for _ in range(3):
        adam_step(params, {"w": np.array([1.0])}, state, cfg)
    # hand-iterated scalar recurrence
    p, m, v = 0.5, 0.0, 0.0
    for t in range(1, 4):
        m = 0.9 * m + 0.1 * 1.0
        v = 0.999 * v + 0.001 * 1.0
        m_hat = m / (1 - 0.9 ** t)
        v_hat = v / (1 - 0.999 ** t)
        p -= 0.1 * m_hat / (math.sqrt(v_hat) + 1e-8)
    assert abs(params["w"][0] - p) < 1e-10


def test_adam_shape_mismatch():
    cfg = TrainConfig(task="emotion", epochs=1)
    params = {"w": np.zeros(3, np.float32)}
    state = AdamState.for_params(params)
    with pytest.raises(ShapeError):
        adam_step(params, {"w": np.zeros(4, np.float32)}, state, cfg)
    with pytest.raises(ShapeError):
        adam_step(params, {}, state, cfg)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(task="emotion", epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(task="emotion", batch_size=0)
    with pytest.raises(ConfigError):
        TrainConfig(task="emotion", learning_rate=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(task="emotion", beta1=1.0)
    with pytest.raises(ConfigError):
        TrainConfig(task="nonsense")
    assert TrainConfig(task="gender").class_count == 2


def test_jensen_ensemble_bound():
    # cross-entropy of the averaged distribution never exceeds the mean of
    # the members' cross-entropies, strictly when the members differ
    rng = np.random.default_rng(2)
    for trial in range(20):
        n, k = 16, 7
        p1 = softmax_direct(rng.standard_normal((n, k)) * 2)
        p2 = softmax_direct(rng.standard_normal((n, k)) * 2)
        targets = rng.integers(0, k, size=n)
        avg = 0.5 * (p1 + p2)
        l_avg, _ = cross_entropy(avg, targets)
        l1, _ = cross_entropy(p1, targets)
        l2, _ = cross_entropy(p2, targets)
        assert l_avg < 0.5 * (l1 + l2)  # strict: members differ a.s.
    # equal members make it an equality
    targets = np.arange(7)
    p = softmax_direct(rng.standard_normal((7, 7)))
    l_avg, _ = cross_entropy(0.5 * (p + p), targets)
    l1, _ = cross_entropy(p, targets)
    assert math.isclose(l_avg, l1, rel_tol=1e-12)
