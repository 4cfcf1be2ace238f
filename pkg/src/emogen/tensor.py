"""Dense float tensors and the primitive array ops the layers build on.

Tensors are row-major (C order) with an explicit shape of rank 1..4; the
4-D interpretation everywhere in the engine is NCHW. Storage is float32
by default, with float64 allowed so gradient checks can run on a 64-bit
shadow path. There is no broadcasting: every shape agreement is explicit
and mismatches raise ShapeError.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ShapeError

MAX_RANK = 4
_ALLOWED = (np.float32, np.float64)


class Tensor:
    """Immutable-by-convention dense float array with explicit shape.

    The wrapped numpy array is exposed as ``.data`` (always C-contiguous);
    operations never mutate their inputs, so tensors can be shared freely
    across threads.
    """

    __slots__ = ("data",)

    def __init__(self, data, dtype=np.float32):
        if np.dtype(dtype).type not in _ALLOWED:
            raise TypeError(f"dtype must be float32 or float64, got {dtype}")
        arr = np.ascontiguousarray(data, dtype=dtype)
        _check_shape(arr.shape)
        self.data = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def rank(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def flat(self) -> np.ndarray:
        """Row-major view of the underlying storage."""
        return self.data.ravel()

    def tolist(self):
        return self.data.tolist()

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data, dtype=dtype)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name})"


def _check_shape(shape: Sequence[int]):
    if len(shape) == 0 or len(shape) > MAX_RANK:
        raise ShapeError(f"rank must be between 1 and {MAX_RANK}, got {len(shape)}")
    for e in shape:
        if e < 1:
            raise ShapeError(f"extents must be >= 1, got {tuple(shape)}")


def create(shape: Sequence[int], fill: float = 0.0, dtype=np.float32) -> Tensor:
    """New tensor of the given shape with every element equal to ``fill``."""
    _check_shape(shape)
    return Tensor(np.full(shape, fill, dtype=dtype), dtype=dtype)


def _require_same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def elementwise_add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; shapes must be identical (no broadcasting)."""
    _require_same_shape(a, b, "elementwise_add")
    return Tensor(a.data + b.data, dtype=a.dtype)


def scale(a: Tensor, k: float) -> Tensor:
    """Multiply every element by the scalar ``k``."""
    return Tensor(a.data * a.dtype.type(k), dtype=a.dtype)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Rank-2 matrix product: (M, K) x (K, P) -> (M, P)."""
    if a.rank != 2 or b.rank != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got ranks {a.rank} and {b.rank}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    return Tensor(a.data @ b.data, dtype=a.dtype)


def pad_nchw(a: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    """Zero-pad the two spatial dims of an NCHW tensor."""
    if a.rank != 4:
        raise ShapeError(f"pad_nchw needs a 4-D tensor, got rank {a.rank}")
    if min(top, bottom, left, right) < 0:
        raise ShapeError("pad counts must be >= 0")
    out = np.pad(a.data, ((0, 0), (0, 0), (top, bottom), (left, right)))
    return Tensor(out, dtype=a.dtype)
