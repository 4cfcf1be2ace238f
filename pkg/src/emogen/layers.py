"""Forward and backward passes for every layer in the engine.

Two surfaces live here:

* functional ops on :class:`~emogen.tensor.Tensor` (``conv2d``,
  ``depthwise_conv2d``, ``softmax``, ...) used directly by tests and by
  anything that wants a one-shot computation, and
* ``Layer`` classes holding parameters, used to assemble networks. Their
  ``forward`` returns ``(y, cache)`` and ``backward(grad_out, cache)``
  returns ``(grad_in, param_grads)``; a cache is only valid for the
  forward call that produced it.

Conventions fixed here so gradients and oracles are reproducible:
"same" padding splits asymmetric amounts as (floor, ceil) on (top/left,
bottom/right); ReLU propagates zero gradient at exactly 0; max-pool
routes gradient to the first maximal window element in row-major order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError
from .tensor import Tensor

PADDING_MODES = ("valid", "same")


# ---------------------------------------------------------------------------
# geometry helpers


def _out_extent(extent: int, kernel: int, stride: int, padding: str) -> int:
    if padding == "valid":
        if extent < kernel:
            raise ShapeError(f"kernel {kernel} larger than input extent {extent}")
        return (extent - kernel) // stride + 1
    return -(-extent // stride)  # ceil(extent / stride)


def _pad_split(extent: int, kernel: int, stride: int, out: int) -> tuple[int, int]:
    total = max((out - 1) * stride + kernel - extent, 0)
    lo = total // 2
    return lo, total - lo


def _check_padding(padding: str):
    if padding not in PADDING_MODES:
        raise ShapeError(f"padding must be one of {PADDING_MODES}, got {padding!r}")


def _spatial_windows(x: np.ndarray, kh: int, kw: int, stride: int, padding: str,
                     pad_value: float = 0.0):
    """Pad an NCHW array and return (windows view, padded array, pads).

    windows has shape (N, C, out_h, out_w, kh, kw).
    """
    _check_padding(padding)
    n, c, h, w = x.shape
    out_h = _out_extent(h, kh, stride, padding)
    out_w = _out_extent(w, kw, stride, padding)
    if padding == "same":
        pt, pb = _pad_split(h, kh, stride, out_h)
        pl, pr = _pad_split(w, kw, stride, out_w)
    else:
        pt = pb = pl = pr = 0
    if pt or pb or pl or pr:
        xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)),
                    constant_values=pad_value)
    else:
        xp = x
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    return win, xp, (pt, pb, pl, pr)


def _scatter_windows(dwin: np.ndarray, padded_shape, stride: int, pads):
    """Inverse of the window view: scatter-add window grads back onto the input."""
    n, c, out_h, out_w, kh, kw = dwin.shape
    dxp = np.zeros(padded_shape, dtype=dwin.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += dwin[:, :, :, :, i, j]
    pt, pb, pl, pr = pads
    h, w = padded_shape[2] - pt - pb, padded_shape[3] - pl - pr
    return dxp[:, :, pt:pt + h, pl:pl + w]


# ---------------------------------------------------------------------------
# numpy kernels (forward + backward); dtype of the inputs is preserved


def conv2d_forward(x, w, b, stride=1, padding="valid"):
    n, c, h, wd = x.shape
    f, cw, kh, kw = w.shape
    if cw != c:
        raise ShapeError(f"conv2d: input has {c} channels, kernels expect {cw}")
    win, xp, pads = _spatial_windows(x, kh, kw, stride, padding)
    out_h, out_w = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n, out_h * out_w, c * kh * kw)
    y = cols @ w.reshape(f, -1).T
    if b is not None:
        y = y + b
    y = y.transpose(0, 2, 1).reshape(n, f, out_h, out_w)
    cache = (cols, xp.shape, x.dtype, w, stride, pads, (out_h, out_w), b is not None)
    return y, cache


def conv2d_backward(dy, cache):
    cols, padded_shape, dtype, w, stride, pads, (out_h, out_w), has_bias = cache
    n = dy.shape[0]
    f, c, kh, kw = w.shape
    dym = dy.reshape(n, f, out_h * out_w).transpose(0, 2, 1)
    dw = np.einsum("nlf,nlk->fk", dym, cols).reshape(w.shape)
    db = dy.sum(axis=(0, 2, 3)) if has_bias else None
    dcols = dym @ w.reshape(f, -1)
    dwin = dcols.reshape(n, out_h, out_w, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    dx = _scatter_windows(dwin.astype(dtype, copy=False), padded_shape, stride, pads)
    return dx, dw, db


def depthwise_forward(x, w, stride=1, padding="valid"):
    n, c, h, wd = x.shape
    cw, kh, kw = w.shape
    if cw != c:
        raise ShapeError(f"depthwise_conv2d: one kernel per channel required, "
                         f"got {cw} kernels for {c} channels")
    win, xp, pads = _spatial_windows(x, kh, kw, stride, padding)
    y = np.einsum("nchwij,cij->nchw", win, w)
    cache = (win, xp.shape, x.dtype, w, stride, pads)
    return y, cache


def depthwise_backward(dy, cache):
    win, padded_shape, dtype, w, stride, pads = cache
    dw = np.einsum("nchw,nchwij->cij", dy, win)
    dwin = dy[:, :, :, :, None, None] * w[None, :, None, None, :, :]
    dx = _scatter_windows(dwin.astype(dtype, copy=False), padded_shape, stride, pads)
    return dx, dw


def pointwise_forward(x, w, b):
    n, c, h, wd = x.shape
    f, m = w.shape
    if m != c:
        raise ShapeError(f"pointwise_conv2d: input has {c} channels, kernels expect {m}")
    y = np.einsum("nchw,fc->nfhw", x, w)
    if b is not None:
        y = y + b[None, :, None, None]
    return y, (x, w, b is not None)


def pointwise_backward(dy, cache):
    x, w, has_bias = cache
    dw = np.einsum("nfhw,nchw->fc", dy, x)
    db = dy.sum(axis=(0, 2, 3)) if has_bias else None
    dx = np.einsum("nfhw,fc->nchw", dy, w)
    return dx, dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var, eps, momentum,
                      train):
    if x.shape[1] != gamma.shape[0]:
        raise ShapeError(f"batchnorm: {x.shape[1]} channels, state has {gamma.shape[0]}")
    if train:
        m = x.shape[0] * x.shape[2] * x.shape[3]
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        # running stats track the batch statistics; they are state, not
        # part of the differentiated graph
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        m = None
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return y.astype(x.dtype, copy=False), (xhat, inv_std, gamma, m, train)


def batchnorm_backward(dy, cache):
    xhat, inv_std, gamma, m, train = cache
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    dxhat = dy * gamma[None, :, None, None]
    if train:
        # differentiates through the batch statistics
        s1 = dxhat.sum(axis=(0, 2, 3))
        s2 = (dxhat * xhat).sum(axis=(0, 2, 3))
        dx = (inv_std[None, :, None, None] / m) * (
            m * dxhat - s1[None, :, None, None] - xhat * s2[None, :, None, None])
    else:
        dx = dxhat * inv_std[None, :, None, None]
    return dx.astype(dy.dtype, copy=False), dgamma, dbeta


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dy, mask):
    return dy * mask


def maxpool_forward(x, window, stride, padding="valid"):
    n, c, h, w = x.shape
    if padding == "valid" and (h < window or w < window):
        raise ShapeError(f"maxpool window {window} larger than input {h}x{w}")
    win, xp, pads = _spatial_windows(x, window, window, stride, padding,
                                     pad_value=-np.inf)
    out_h, out_w = win.shape[2], win.shape[3]
    flat = win.reshape(n, c, out_h, out_w, window * window)
    idx = flat.argmax(axis=-1)  # first max in row-major order wins
    y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    cache = (idx, xp.shape, x.dtype, window, stride, pads, (out_h, out_w))
    return y, cache


def maxpool_backward(dy, cache):
    idx, padded_shape, dtype, window, stride, pads, (out_h, out_w) = cache
    n, c = padded_shape[0], padded_shape[1]
    dxp = np.zeros(padded_shape, dtype=dtype)
    ni, ci, hi, wi = np.ogrid[:n, :c, :out_h, :out_w]
    hy = hi * stride + idx // window
    wx = wi * stride + idx % window
    np.add.at(dxp, (np.broadcast_to(ni, idx.shape), np.broadcast_to(ci, idx.shape), hy, wx), dy)
    pt, pb, pl, pr = pads
    h, w = padded_shape[2] - pt - pb, padded_shape[3] - pl - pr
    return dxp[:, :, pt:pt + h, pl:pl + w]


def gap_forward(x):
    n, c, h, w = x.shape
    return x.mean(axis=(2, 3)), (x.shape,)


def gap_backward(dy, cache):
    (shape,) = cache
    n, c, h, w = shape
    return np.broadcast_to(dy[:, :, None, None], shape) / (h * w)


def dense_forward(x, w, b):
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"dense: input width {x.shape[1]} vs weights {w.shape[0]}")
    y = x @ w
    if b is not None:
        y = y + b
    return y, (x, w, b is not None)


def dense_backward(dy, cache):
    x, w, has_bias = cache
    dw = x.T @ dy
    db = dy.sum(axis=0) if has_bias else None
    dx = dy @ w.T
    return dx, dw, db


def softmax_forward(z):
    zmax = z.max(axis=1, keepdims=True)
    e = np.exp(z - zmax)
    p = e / e.sum(axis=1, keepdims=True)
    return p, p


def softmax_backward(dy, p):
    inner = (dy * p).sum(axis=1, keepdims=True)
    return p * (dy - inner)


# ---------------------------------------------------------------------------
# functional ops on Tensor (validation + delegation to the kernels)


@dataclass(frozen=True)
class SeparableConvSpec:
    """Hyperparameters of one depthwise-separable convolution.

    kernel_extent is the square spatial size of the depthwise stage,
    in_channels the channels it runs over, out_channels the width after
    the pointwise stage. The stride applies to the depthwise stage; the
    pointwise stage is always per-pixel.
    """

    kernel_extent: int
    in_channels: int
    out_channels: int
    stride: int = 1
    padding: str = "same"

    def __post_init__(self):
        if min(self.kernel_extent, self.in_channels, self.out_channels, self.stride) < 1:
            raise ShapeError(f"separable spec fields must be >= 1: {self}")
        _check_padding(self.padding)


def _as4d(t: Tensor, op: str) -> np.ndarray:
    if t.rank != 4:
        raise ShapeError(f"{op}: expected a 4-D NCHW tensor, got rank {t.rank}")
    return t.data


def conv2d(input: Tensor, kernels: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: str = "valid") -> Tensor:
    """Standard convolution: kernels (F, C, D, D), optional bias (F,)."""
    x = _as4d(input, "conv2d")
    if kernels.rank != 4:
        raise ShapeError(f"conv2d: kernels must be 4-D, got rank {kernels.rank}")
    b = None
    if bias is not None:
        if bias.shape != (kernels.shape[0],):
            raise ShapeError(f"conv2d: bias shape {bias.shape} vs {kernels.shape[0]} filters")
        b = bias.data
    y, _ = conv2d_forward(x, kernels.data, b, stride, padding)
    return Tensor(y, dtype=input.dtype)


def depthwise_conv2d(input: Tensor, kernels: Tensor, stride: int = 1,
                     padding: str = "valid") -> Tensor:
    """Per-channel convolution: kernels (C, D, D), channel count preserved."""
    x = _as4d(input, "depthwise_conv2d")
    if kernels.rank != 3:
        raise ShapeError(f"depthwise_conv2d: kernels must be 3-D, got rank {kernels.rank}")
    y, _ = depthwise_forward(x, kernels.data, stride, padding)
    return Tensor(y, dtype=input.dtype)


def pointwise_conv2d(input: Tensor, kernels: Tensor,
                     bias: Tensor | None = None) -> Tensor:
    """Per-pixel channel mixing: kernels (N_out, M)."""
    x = _as4d(input, "pointwise_conv2d")
    if kernels.rank != 2:
        raise ShapeError(f"pointwise_conv2d: kernels must be 2-D, got rank {kernels.rank}")
    b = None
    if bias is not None:
        if bias.shape != (kernels.shape[0],):
            raise ShapeError(f"pointwise_conv2d: bias shape {bias.shape} mismatched")
        b = bias.data
    y, _ = pointwise_forward(x, kernels.data, b)
    return Tensor(y, dtype=input.dtype)


def separable_conv2d(input: Tensor, spec: SeparableConvSpec,
                     depthwise_kernels: Tensor, pointwise_kernels: Tensor,
                     bias: Tensor | None = None) -> Tensor:
    """Depthwise stage followed by pointwise stage; the composition is the definition."""
    d, m, n = spec.kernel_extent, spec.in_channels, spec.out_channels
    if depthwise_kernels.shape != (m, d, d):
        raise ShapeError(f"separable_conv2d: depthwise kernels {depthwise_kernels.shape} "
                         f"do not match spec ({m}, {d}, {d})")
    if pointwise_kernels.shape != (n, m):
        raise ShapeError(f"separable_conv2d: pointwise kernels {pointwise_kernels.shape} "
                         f"do not match spec ({n}, {m})")
    mid = depthwise_conv2d(input, depthwise_kernels, spec.stride, spec.padding)
    return pointwise_conv2d(mid, pointwise_kernels, bias)


def multiply_count(op_kind: str, spec: SeparableConvSpec, out_h: int, out_w: int) -> int:
    """Scalar multiplications a convolution performs on a given output plane.

    standard: D^2 * M * N per output cell; separable: D^2 * M for the
    depthwise stage plus M * N for the pointwise stage. The separable /
    standard ratio is 1/N + 1/D^2.
    """
    d, m, n = spec.kernel_extent, spec.in_channels, spec.out_channels
    cells = out_h * out_w
    if op_kind == "standard":
        return d * d * m * n * cells
    if op_kind == "separable":
        return d * d * m * cells + m * n * cells
    raise ValueError(f"op_kind must be 'standard' or 'separable', got {op_kind!r}")


def batchnorm(input: Tensor, state: "BatchNorm", mode: str = "infer") -> Tensor:
    """Channel normalization; 'train' uses batch statistics and updates the
    running ones, 'infer' uses the running statistics."""
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    x = _as4d(input, "batchnorm")
    y, _ = state.forward(x, train=(mode == "train"))
    return Tensor(y, dtype=input.dtype)


def relu(input: Tensor) -> Tensor:
    y, _ = relu_forward(input.data)
    return Tensor(y, dtype=input.dtype)


def maxpool2d(input: Tensor, window: int, stride: int, padding: str = "valid") -> Tensor:
    x = _as4d(input, "maxpool2d")
    y, _ = maxpool_forward(x, window, stride, padding)
    return Tensor(y, dtype=input.dtype)


def global_avg_pool(input: Tensor) -> Tensor:
    x = _as4d(input, "global_avg_pool")
    y, _ = gap_forward(x)
    return Tensor(y, dtype=input.dtype)


def dense(input: Tensor, weights: Tensor, bias: Tensor | None = None) -> Tensor:
    if input.rank != 2 or weights.rank != 2:
        raise ShapeError("dense: input and weights must be rank-2")
    b = None
    if bias is not None:
        if bias.shape != (weights.shape[1],):
            raise ShapeError(f"dense: bias shape {bias.shape} vs {weights.shape[1]} outputs")
        b = bias.data
    y, _ = dense_forward(input.data, weights.data, b)
    return Tensor(y, dtype=input.dtype)


def softmax(logits: Tensor) -> Tensor:
    if logits.rank != 2:
        raise ShapeError(f"softmax: expected (N, K), got rank {logits.rank}")
    p, _ = softmax_forward(logits.data)
    return Tensor(p, dtype=logits.dtype)


def residual_add(main: Tensor, shortcut: Tensor) -> Tensor:
    if main.shape != shortcut.shape:
        raise ShapeError(f"residual_add: shapes {main.shape} and {shortcut.shape} differ")
    return Tensor(main.data + shortcut.data, dtype=main.dtype)


# ---------------------------------------------------------------------------
# layer classes


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int,
                   dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base layer: parameters in ``params``, extra non-trainable arrays in ``state``."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.state: dict[str, np.ndarray] = {}

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, grad_out, cache):
        raise NotImplementedError

    def param_count(self) -> int:
        return sum(int(p.size) for p in self.params.values())

    def named_params(self) -> dict[str, np.ndarray]:
        return self.params

    def named_state(self) -> dict[str, np.ndarray]:
        return self.state

    def cast(self, dtype):
        for k in self.params:
            self.params[k] = self.params[k].astype(dtype)
        for k in self.state:
            self.state[k] = self.state[k].astype(dtype)
        return self


class Conv2D(Layer):
    def __init__(self, in_channels, out_channels, kernel, stride=1,
                 padding="same", bias=True, rng=None):
        super().__init__()
        _check_padding(padding)
        self.stride, self.padding = stride, padding
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel * kernel
        fan_out = out_channels * kernel * kernel
        self.params["weight"] = glorot_uniform(
            rng, (out_channels, in_channels, kernel, kernel), fan_in, fan_out)
        if bias:
            self.params["bias"] = np.zeros(out_channels, dtype=np.float32)

    def forward(self, x, train=False):
        return conv2d_forward(x, self.params["weight"], self.params.get("bias"),
                              self.stride, self.padding)

    def backward(self, grad_out, cache):
        dx, dw, db = conv2d_backward(grad_out, cache)
        grads = {"weight": dw}
        if db is not None:
            grads["bias"] = db
        return dx, grads


class SeparableConv2D(Layer):
    """Depthwise (no bias, one kernel per channel) followed by pointwise (+bias)."""

    def __init__(self, in_channels, out_channels, kernel, stride=1,
                 padding="same", rng=None):
        super().__init__()
        _check_padding(padding)
        self.stride, self.padding = stride, padding
        rng = rng or np.random.default_rng(0)
        k2 = kernel * kernel
        self.params["depthwise"] = glorot_uniform(
            rng, (in_channels, kernel, kernel), k2, k2)
        self.params["pointwise"] = glorot_uniform(
            rng, (out_channels, in_channels), in_channels, out_channels)
        self.params["bias"] = np.zeros(out_channels, dtype=np.float32)

    def forward(self, x, train=False):
        mid, dw_cache = depthwise_forward(x, self.params["depthwise"],
                                          self.stride, self.padding)
        y, pw_cache = pointwise_forward(mid, self.params["pointwise"],
                                        self.params["bias"])
        return y, (dw_cache, pw_cache)

    def backward(self, grad_out, cache):
        dw_cache, pw_cache = cache
        dmid, dpw, db = pointwise_backward(grad_out, pw_cache)
        dx, ddw = depthwise_backward(dmid, dw_cache)
        return dx, {"depthwise": ddw, "pointwise": dpw, "bias": db}


class BatchNorm(Layer):
    def __init__(self, channels, eps=1e-5, momentum=0.9):
        super().__init__()
        if eps <= 0:
            raise ShapeError("batchnorm eps must be > 0")
        if not 0.0 < momentum < 1.0:
            raise ShapeError("batchnorm momentum must be in (0, 1)")
        self.eps, self.momentum = eps, momentum
        self.params["gamma"] = np.ones(channels, dtype=np.float32)
        self.params["beta"] = np.zeros(channels, dtype=np.float32)
        self.state["running_mean"] = np.zeros(channels, dtype=np.float32)
        self.state["running_var"] = np.ones(channels, dtype=np.float32)

    def forward(self, x, train=False):
        return batchnorm_forward(x, self.params["gamma"], self.params["beta"],
                                 self.state["running_mean"], self.state["running_var"],
                                 self.eps, self.momentum, train)

    def backward(self, grad_out, cache):
        dx, dgamma, dbeta = batchnorm_backward(grad_out, cache)
        return dx, {"gamma": dgamma, "beta": dbeta}


class ReLU(Layer):
    def forward(self, x, train=False):
        return relu_forward(x)

    def backward(self, grad_out, cache):
        return relu_backward(grad_out, cache), {}


class MaxPool2D(Layer):
    def __init__(self, window, stride, padding="valid"):
        super().__init__()
        _check_padding(padding)
        self.window, self.stride, self.padding = window, stride, padding

    def forward(self, x, train=False):
        return maxpool_forward(x, self.window, self.stride, self.padding)

    def backward(self, grad_out, cache):
        return maxpool_backward(grad_out, cache), {}


class GlobalAvgPool(Layer):
    def forward(self, x, train=False):
        return gap_forward(x)

    def backward(self, grad_out, cache):
        return gap_backward(grad_out, cache), {}


class Dense(Layer):
    def __init__(self, in_features, out_features, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.params["weight"] = glorot_uniform(
            rng, (in_features, out_features), in_features, out_features)
        self.params["bias"] = np.zeros(out_features, dtype=np.float32)

    def forward(self, x, train=False):
        return dense_forward(x, self.params["weight"], self.params["bias"])

    def backward(self, grad_out, cache):
        dx, dw, db = dense_backward(grad_out, cache)
        return dx, {"weight": dw, "bias": db}


class Softmax(Layer):
    def forward(self, x, train=False):
        return softmax_forward(x)

    def backward(self, grad_out, cache):
        return softmax_backward(grad_out, cache), {}
