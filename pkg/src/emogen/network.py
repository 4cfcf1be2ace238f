"""Composing layers into networks: sequential chains and residual blocks.

Every node (Layer, Sequential, ResidualBlock) follows one protocol:
``forward(x, train) -> (y, cache)``, ``backward(grad_out, cache) ->
(grad_in, grads)`` where ``grads`` maps slash-joined parameter paths to
gradient arrays, plus ``named_params()`` / ``named_state()`` for the
optimizer and the weight archive.
"""

from __future__ import annotations

import copy

import numpy as np

from .errors import ShapeError
from .layers import Softmax
from .tensor import Tensor


def _prefixed(prefix: str, d: dict) -> dict:
    return {f"{prefix}/{k}": v for k, v in d.items()}


class Sequential:
    """Ordered chain of named nodes; caches thread through in order."""

    def __init__(self, items):
        self.items = list(items)
        names = [n for n, _ in self.items]
        if len(set(names)) != len(names):
            raise ShapeError(f"duplicate node names in sequential: {names}")

    def forward(self, x, train=False):
        caches = []
        for _, node in self.items:
            x, cache = node.forward(x, train=train)
            caches.append(cache)
        return x, caches

    def backward(self, grad_out, caches):
        grads = {}
        for (name, node), cache in zip(reversed(self.items), reversed(caches)):
            grad_out, node_grads = node.backward(grad_out, cache)
            grads.update(_prefixed(name, node_grads))
        return grad_out, grads

    def named_params(self) -> dict[str, np.ndarray]:
        out = {}
        for name, node in self.items:
            out.update(_prefixed(name, node.named_params()))
        return out

    def named_state(self) -> dict[str, np.ndarray]:
        out = {}
        for name, node in self.items:
            out.update(_prefixed(name, node.named_state()))
        return out

    def param_count(self) -> int:
        return sum(node.param_count() for _, node in self.items)

    def cast(self, dtype):
        for _, node in self.items:
            node.cast(dtype)
        return self


class ResidualBlock:
    """Main branch plus projected shortcut, summed elementwise."""

    def __init__(self, main: Sequential, shortcut: Sequential):
        self.main = main
        self.shortcut = shortcut

    def forward(self, x, train=False):
        ym, cm = self.main.forward(x, train=train)
        ys, cs = self.shortcut.forward(x, train=train)
        if ym.shape != ys.shape:
            raise ShapeError(f"residual branches disagree: {ym.shape} vs {ys.shape}")
        return ym + ys, (cm, cs)

    def backward(self, grad_out, cache):
        cm, cs = cache
        dxm, gm = self.main.backward(grad_out, cm)
        dxs, gs = self.shortcut.backward(grad_out, cs)
        grads = _prefixed("main", gm)
        grads.update(_prefixed("shortcut", gs))
        return dxm + dxs, grads

    def named_params(self):
        out = _prefixed("main", self.main.named_params())
        out.update(_prefixed("shortcut", self.shortcut.named_params()))
        return out

    def named_state(self):
        out = _prefixed("main", self.main.named_state())
        out.update(_prefixed("shortcut", self.shortcut.named_state()))
        return out

    def param_count(self):
        return self.main.param_count() + self.shortcut.param_count()

    def cast(self, dtype):
        self.main.cast(dtype)
        self.shortcut.cast(dtype)
        return self


class Network:
    """A built architecture: layer chain, descriptor list, and metadata.

    The final node must be a softmax over ``class_count`` classes; the
    shape chain is validated at build time by a dry forward pass.
    """

    def __init__(self, kind: str, body: Sequential, class_count: int,
                 input_shape=(1, 48, 48), spec=None):
        self.kind = kind
        self.body = body
        self.class_count = class_count
        self.input_shape = tuple(input_shape)
        self.spec = spec or []
        last = body.items[-1][1]
        if not isinstance(last, Softmax):
            raise ShapeError("network must end in a softmax layer")
        probe = np.zeros((1, *self.input_shape), dtype=np.float32)
        out, _ = body.forward(probe, train=False)
        if out.shape != (1, class_count):
            raise ShapeError(f"network output shape {out.shape} does not match "
                             f"(1, {class_count})")

    def forward(self, x: np.ndarray, train=False):
        return self.body.forward(x, train=train)

    def backward(self, grad_probs, caches):
        return self.body.backward(grad_probs, caches)

    def predict_probs(self, x: np.ndarray) -> np.ndarray:
        """Inference forward pass (running statistics, no cache kept)."""
        y, _ = self.body.forward(x, train=False)
        return y

    def named_params(self):
        return self.body.named_params()

    def named_state(self):
        return self.body.named_state()

    def param_count(self):
        return self.body.param_count()

    def cast(self, dtype):
        self.body.cast(dtype)
        return self

    def double(self) -> "Network":
        """Independent float64 copy for gradient-check shadow runs."""
        clone = copy.deepcopy(self)
        clone.cast(np.float64)
        return clone

    def forward_tensor(self, t: Tensor, train=False) -> Tensor:
        y, _ = self.forward(t.data, train=train)
        return Tensor(y, dtype=t.dtype)
