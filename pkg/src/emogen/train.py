"""Training loop and the finite-difference gradient-check harness."""

from __future__ import annotations

import copy

import numpy as np

from .errors import DataError, LabelError
from .metrics import evaluate
from .models import Model
from .network import Network
from .optim import AdamState, TrainConfig, adam_step, cross_entropy_prob_grad


def train_step(model: Model, xb: np.ndarray, yb: np.ndarray,
               state: AdamState, cfg: TrainConfig) -> float:
    """One forward/backward/Adam update over a batch; returns the batch loss."""
    probs, caches = model.forward(xb, train=True)
    loss, dprobs = cross_entropy_prob_grad(probs, yb)
    grads = model.backward(dprobs, caches)
    adam_step(model.named_params(), grads, state, cfg)
    return loss


def train_epochs(model: Model, train_ds, val_ds, cfg: TrainConfig,
                 progress=None) -> list[tuple[int, float, float]]:
    """Train for cfg.epochs with per-epoch shuffling; fully seeded, so two
    runs with the same seed, data, and config produce identical weights.

    Returns the per-epoch ``(epoch, train_loss, val_accuracy)`` trace,
    and emits each entry to ``progress`` as a CSV line when given.
    """
    if len(train_ds) == 0:
        raise DataError("empty training set")
    k = model.class_count
    if train_ds.labels.min() < 0 or train_ds.labels.max() >= k:
        raise LabelError(f"training labels outside [0, {k})")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState.for_params(model.named_params())
    n = len(train_ds)
    trace = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, cfg.batch_size):  # last partial batch kept
            idx = order[start:start + cfg.batch_size]
            loss = train_step(model, train_ds.images[idx], train_ds.labels[idx],
                              state, cfg)
            total += loss * len(idx)
            seen += len(idx)
        train_loss = total / seen
        val_acc = evaluate(model, val_ds).accuracy if val_ds is not None else float("nan")
        trace.append((epoch, train_loss, val_acc))
        if progress is not None:
            progress(f"{epoch},{train_loss:.6f},{val_acc:.4f}")
    return trace


# ---------------------------------------------------------------------------
# gradient checking (64-bit shadow path, central differences)

FD_STEP = 1e-5
# relative error with an absolute floor on the denominator so that
# finite-difference noise on near-zero components is not amplified
_REL_FLOOR = 1e-2


def _rel_err(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), _REL_FLOOR)


def _coords(arr: np.ndarray, limit, rng) -> list[tuple]:
    all_coords = list(np.ndindex(arr.shape))
    if limit is None or len(all_coords) <= limit:
        return all_coords
    picks = rng.choice(len(all_coords), size=limit, replace=False)
    return [all_coords[i] for i in picks]


def _fd_slope(arr, idx, loss_at, h):
    """Central difference at steps h and h/2.

    When the two estimates disagree, the interval straddles a point where
    the loss is not differentiable (a ReLU switch or a max-pool argmax
    flip), so the secant says nothing about the derivative at the point
    itself; such coordinates are reported as unusable and skipped.
    """
    orig = arr[idx]
    slopes = []
    for step in (h, h / 2):
        arr[idx] = orig + step
        up = loss_at()
        arr[idx] = orig - step
        down = loss_at()
        slopes.append((up - down) / (2 * step))
    arr[idx] = orig
    d1, d2 = slopes
    # smooth coordinates agree to ~1e-10 relative (truncation); anything
    # beyond 1e-4 means the secants sampled different smooth pieces
    smooth = abs(d1 - d2) <= 1e-4 * max(abs(d1), abs(d2), _REL_FLOOR)
    return d2, smooth


def _layer_check(node, input_shape, h, rng, param_samples) -> float:
    node = copy.deepcopy(node)
    node.cast(np.float64)
    x = rng.standard_normal(input_shape)
    y, cache = node.forward(x, train=True)
    proj = rng.standard_normal(y.shape)  # loss = sum(y * proj)
    dx, dparams = node.backward(proj, cache)

    def loss_at():
        out, _ = node.forward(x, train=True)
        return float((out * proj).sum())

    worst = 0.0
    for idx in _coords(x, param_samples, rng):
        slope, smooth = _fd_slope(x, idx, loss_at, h)
        if smooth:
            worst = max(worst, _rel_err(dx[idx], slope))
    for name, p in node.named_params().items():
        for idx in _coords(p, param_samples, rng):
            slope, smooth = _fd_slope(p, idx, loss_at, h)
            if smooth:
                worst = max(worst, _rel_err(dparams[name][idx], slope))
    return worst


def _model_check(model, input_shape, h, rng, param_samples, input_samples) -> float:
    if isinstance(model, Network):
        model = Model({model.kind: model})
    members = {name: net.double() for name, net in model.members.items()}
    shadow = Model(members)
    batch = input_shape if len(input_shape) == 4 else (2, *input_shape)
    x = rng.standard_normal(batch)
    labels = rng.integers(0, shadow.class_count, size=batch[0])

    def loss_at():
        probs, _ = shadow.forward(x, train=True)
        return cross_entropy_prob_grad(probs, labels)[0]

    probs, caches = shadow.forward(x, train=True)
    loss, dprobs = cross_entropy_prob_grad(probs, labels)
    grads = shadow.backward(dprobs, caches)

    worst = 0.0
    params = shadow.named_params()
    for name, p in params.items():
        for idx in _coords(p, param_samples, rng):
            slope, smooth = _fd_slope(p, idx, loss_at, h)
            if smooth:
                worst = max(worst, _rel_err(grads[name][idx], slope))
    if input_samples:
        # spot-check dL/dx through the whole stack as well
        probs, caches = shadow.forward(x, train=True)
        _, dprobs = cross_entropy_prob_grad(probs, labels)
        dx = None
        for name, net in shadow.members.items():
            din, _ = net.backward(dprobs / len(shadow.members), caches[name])
            dx = din if dx is None else dx + din
        for idx in _coords(x, input_samples, rng):
            slope, smooth = _fd_slope(x, idx, loss_at, h)
            if smooth:
                worst = max(worst, _rel_err(dx[idx], slope))
    return worst


def grad_check(target, input_shape, *, seed=0, h=FD_STEP,
               param_samples=None, input_samples=8) -> float:
    """Max relative error between analytic gradients and 64-bit central
    finite differences.

    ``target`` is a layer-like node (Layer, Sequential, ResidualBlock;
    checked against a random linear projection loss with every coordinate
    swept) or a Network/Model (checked against the cross-entropy training
    loss; ``param_samples`` limits how many coordinates per parameter
    tensor are probed, None sweeps them all). The target itself is never
    mutated; the check runs on a float64 copy.

    Coordinates whose h and h/2 central differences disagree straddle a
    non-differentiable point (ReLU switch, pool argmax flip) where the
    secant is meaningless; they are skipped rather than compared.
    """
    rng = np.random.default_rng(seed)
    if isinstance(target, (Network, Model)):
        return _model_check(target, input_shape, h, rng, param_samples, input_samples)
    return _layer_check(target, input_shape, h, rng, param_samples)
