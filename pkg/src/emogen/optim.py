"""Categorical cross-entropy and the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, LabelError, ShapeError
from .tensor import Tensor

LOG_CLAMP = 1e-12

TASK_CLASSES = {"emotion": 7, "gender": 2}


@dataclass
class TrainConfig:
    task: str
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 42

    def __post_init__(self):
        if self.task not in TASK_CLASSES:
            raise ConfigError(f"task must be one of {sorted(TASK_CLASSES)}, got {self.task!r}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in (0, 1)")

    @property
    def class_count(self) -> int:
        return TASK_CLASSES[self.task]


def _probs_array(probs) -> np.ndarray:
    arr = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    if arr.ndim != 2:
        raise ShapeError(f"probabilities must be (N, K), got shape {arr.shape}")
    return arr


def _check_targets(targets, k: int) -> np.ndarray:
    t = np.asarray(targets, dtype=np.int64)
    if t.ndim != 1:
        raise ShapeError(f"targets must be a 1-D index sequence, got shape {t.shape}")
    if t.size and (t.min() < 0 or t.max() >= k):
        raise LabelError(f"target indices must lie in [0, {k}), got range "
                         f"[{t.min()}, {t.max()}]")
    return t


def cross_entropy(probs, targets) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood plus its gradient w.r.t. the logits.

    ``probs`` rows must be softmax outputs; probabilities are clamped to
    >= 1e-12 before the log. The returned gradient is the fused
    softmax+NLL form (probs - onehot) / N.
    """
    p = _probs_array(probs)
    n, k = p.shape
    t = _check_targets(targets, k)
    if t.shape[0] != n:
        raise ShapeError(f"{n} probability rows vs {t.shape[0]} targets")
    picked = np.maximum(p[np.arange(n), t], LOG_CLAMP)
    loss = float(-np.log(picked).mean())
    grad = p.copy()
    grad[np.arange(n), t] -= 1.0
    grad /= n
    return loss, grad.astype(p.dtype, copy=False)


def cross_entropy_prob_grad(probs, targets) -> tuple[float, np.ndarray]:
    """Same loss, but the gradient w.r.t. the probabilities themselves.

    This is the training-path form: it backpropagates through each
    member's softmax layer, so it also covers heads whose output is an
    average of several softmax distributions.
    """
    p = _probs_array(probs)
    n, k = p.shape
    t = _check_targets(targets, k)
    picked = np.maximum(p[np.arange(n), t], LOG_CLAMP)
    loss = float(-np.log(picked).mean())
    grad = np.zeros_like(p)
    grad[np.arange(n), t] = -1.0 / (n * picked)
    return loss, grad


@dataclass
class AdamState:
    """Per-parameter first/second moment buffers and the shared step counter."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict, grads: dict, state: AdamState, cfg: TrainConfig):
    """One Adam update, in place on ``params``.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  bias-corrected with the
    step counter incremented first;  p <- p - lr * m_hat / (sqrt(v_hat) + eps).
    """
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        if name not in grads:
            raise ShapeError(f"missing gradient for parameter {name!r}")
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} vs parameter {p.shape} for {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.adam_epsilon)
