"""Cascade-based frontal-face detection over an integral-image pyramid.

The cascade file is plain JSON: ``window_w``, ``window_h`` and
``stages[]``, each stage ``{threshold, weak[]}`` and each weak classifier
``{rects: [[x, y, w, h, weight], ...], threshold, left, right}`` with
rectangle coordinates relative to the base window. Windows slide over a
scale pyramid (features are scaled, the image is not); raw hits are
grouped by IoU >= 0.3 into mean boxes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError

IOU_GROUP_THRESHOLD = 0.3
DEFAULT_SCALE_FACTOR = 1.1
DEFAULT_MIN_NEIGHBORS = 3
DEFAULT_MIN_SIZE = 30


@dataclass(frozen=True)
class WeakClassifier:
    rects: tuple           # ((x, y, w, h, weight), ...)
    threshold: float
    left: float
    right: float


@dataclass(frozen=True)
class CascadeStage:
    threshold: float
    weak: tuple


@dataclass(frozen=True)
class CascadeModel:
    window_w: int
    window_h: int
    stages: tuple

    def __post_init__(self):
        if not self.stages:
            raise DataError("cascade must have at least one stage")
        for stage in self.stages:
            for weak in stage.weak:
                for (x, y, w, h, _) in weak.rects:
                    if x < 0 or y < 0 or w <= 0 or h <= 0 \
                            or x + w > self.window_w or y + h > self.window_h:
                        raise DataError(f"feature rect ({x},{y},{w},{h}) outside "
                                        f"{self.window_w}x{self.window_h} window")

    @classmethod
    def from_dict(cls, d: dict) -> "CascadeModel":
        stages = tuple(
            CascadeStage(
                threshold=float(s["threshold"]),
                weak=tuple(
                    WeakClassifier(
                        rects=tuple(tuple(r) for r in w["rects"]),
                        threshold=float(w["threshold"]),
                        left=float(w["left"]),
                        right=float(w["right"]),
                    )
                    for w in s["weak"]),
            )
            for s in d["stages"])
        return cls(int(d["window_w"]), int(d["window_h"]), stages)


def load_cascade(path) -> CascadeModel:
    with open(path, encoding="utf-8") as fh:
        return CascadeModel.from_dict(json.load(fh))


@dataclass(frozen=True)
class Detection:
    x: int
    y: int
    w: int
    h: int
    score: float  # size of the merged group


def integral_image(img: np.ndarray) -> np.ndarray:
    """(H+1, W+1) int64 table; ii[y, x] = sum of pixels above and left of (y, x)."""
    if img.ndim != 2:
        raise ShapeError(f"integral_image expects a 2-D image, got {img.shape}")
    ii = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.int64)
    ii[1:, 1:] = img.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
    return ii


def box_sum(ii: np.ndarray, x: int, y: int, w: int, h: int):
    """Rectangle sum in 4 lookups."""
    return ii[y + h, x + w] - ii[y, x + w] - ii[y + h, x] + ii[y, x]


def _scaled_rect(rect, scale: float):
    x, y, w, h, weight = rect
    return (int(round(x * scale)), int(round(y * scale)),
            max(1, int(round(w * scale))), max(1, int(round(h * scale))), weight)


def _window_std(ii, ii2, x, y, w, h):
    area = w * h
    s1 = box_sum(ii, x, y, w, h)
    s2 = box_sum(ii2, x, y, w, h)
    mean = s1 / area
    var = s2 / area - mean * mean
    std = np.sqrt(np.maximum(var, 0.0))
    return np.maximum(std, 1.0)  # flat windows clamp to 1


def eval_window(cascade: CascadeModel, ii: np.ndarray, x: int, y: int,
                scale: float = 1.0, ii2: np.ndarray | None = None) -> bool:
    """Evaluate one window position; accept only if every stage passes."""
    sw = int(round(cascade.window_w * scale))
    sh = int(round(cascade.window_h * scale))
    if x < 0 or y < 0 or y + sh > ii.shape[0] - 1 or x + sw > ii.shape[1] - 1:
        raise ShapeError(f"window ({x},{y},{sw},{sh}) out of bounds")
    if ii2 is None:
        ii2 = _squared_integral_from(ii)
    area = sw * sh
    std = float(_window_std(ii, ii2, x, y, sw, sh))
    for stage in cascade.stages:
        total = 0.0
        for weak in stage.weak:
            f = 0.0
            for rect in weak.rects:
                rx, ry, rw, rh, weight = _scaled_rect(rect, scale)
                f += weight * box_sum(ii, x + rx, y + ry, rw, rh)
            total += weak.left if f < weak.threshold * area * std else weak.right
        if total < stage.threshold:
            return False
    return True


def _squared_integral_from(ii):
    # reconstruct pixels from the integral table, then integrate their squares
    px = ii[1:, 1:] - ii[:-1, 1:] - ii[1:, :-1] + ii[:-1, :-1]
    return integral_image(px * px)


def _rect_sums(ii, xs, ys, rx, ry, rw, rh):
    return (ii[ys + ry + rh, xs + rx + rw] - ii[ys + ry, xs + rx + rw]
            - ii[ys + ry + rh, xs + rx] + ii[ys + ry, xs + rx])


def _grid_rect_sum(table, x0, y0, rw, rh, ny, nx, step):
    """Rectangle sums for the whole dense (ny, nx) position grid at once,
    via strided views of the integral table (no index gathers)."""
    ye, xe = y0 + ny * step, x0 + nx * step
    return (table[y0 + rh:ye + rh:step, x0 + rw:xe + rw:step]
            - table[y0:ye:step, x0 + rw:xe + rw:step]
            - table[y0 + rh:ye + rh:step, x0:xe:step]
            + table[y0:ye:step, x0:xe:step])


def _scan_scale(cascade, ii, ii2, scale, img_h, img_w, step):
    """Evaluate every grid position at one scale; returns accepted (xs, ys).

    The first stage (and the variance normalization) run on the dense
    grid with strided slicing; survivors move to sparse gather-based
    evaluation for the remaining stages.
    """
    sw = int(round(cascade.window_w * scale))
    sh = int(round(cascade.window_h * scale))
    nx = (img_w - sw) // step + 1
    ny = (img_h - sh) // step + 1
    empty = np.empty(0, np.intp)
    if nx <= 0 or ny <= 0:
        return empty, empty
    area = sw * sh
    mean = _grid_rect_sum(ii, 0, 0, sw, sh, ny, nx, step) / area
    var = _grid_rect_sum(ii2, 0, 0, sw, sh, ny, nx, step) / area - mean * mean
    std = np.sqrt(np.maximum(var, 0.0))
    np.maximum(std, 1.0, out=std)

    stage = cascade.stages[0]
    total = np.zeros((ny, nx))
    for weak in stage.weak:
        f = np.zeros((ny, nx))
        for rect in weak.rects:
            rx, ry, rw, rh, weight = _scaled_rect(rect, scale)
            f += weight * _grid_rect_sum(ii, rx, ry, rw, rh, ny, nx, step)
        total += np.where(f < weak.threshold * area * std, weak.left, weak.right)
    alive = np.nonzero((total >= stage.threshold).ravel())[0]
    ax = (alive % nx).astype(np.intp) * step
    ay = (alive // nx).astype(np.intp) * step
    astd = std.ravel()[alive]
    for stage in cascade.stages[1:]:
        if ax.size == 0:
            break
        total = np.zeros(ax.size)
        for weak in stage.weak:
            f = np.zeros(ax.size)
            for rect in weak.rects:
                rx, ry, rw, rh, weight = _scaled_rect(rect, scale)
                f += weight * _rect_sums(ii, ax, ay, rx, ry, rw, rh)
            total += np.where(f < weak.threshold * area * astd, weak.left, weak.right)
        keep = total >= stage.threshold
        ax, ay, astd = ax[keep], ay[keep], astd[keep]
    return ax, ay


def detect_faces(cascade: CascadeModel, img: np.ndarray,
                 scale_factor: float = DEFAULT_SCALE_FACTOR,
                 min_neighbors: int = DEFAULT_MIN_NEIGHBORS,
                 min_size: int = DEFAULT_MIN_SIZE) -> list[Detection]:
    """Slide the cascade over a scale pyramid and group the raw hits.

    Returns one mean box per surviving group, ordered by (y, x, w, h);
    an image smaller than the base window yields an empty list.
    """
    if scale_factor <= 1.0:
        raise DataError(f"scale_factor must be > 1, got {scale_factor}")
    h, w = img.shape
    if h < cascade.window_h or w < cascade.window_w:
        return []
    ii = integral_image(img)
    px = img.astype(np.int64)
    ii2 = integral_image(px * px)
    raw = []
    scale = 1.0
    while True:
        sw = int(round(cascade.window_w * scale))
        sh = int(round(cascade.window_h * scale))
        if sw > w or sh > h:
            break
        if sw >= min_size and sh >= min_size:
            step = max(1, int(round(scale)))
            xs, ys = _scan_scale(cascade, ii, ii2, scale, h, w, step)
            raw.extend((int(x), int(y), sw, sh) for x, y in zip(xs, ys))
        scale *= scale_factor
    # rounding the mean box can push one past the edge; clamp back inside
    return [Detection(x=min(max(d.x, 0), w - d.w), y=min(max(d.y, 0), h - d.h),
                      w=d.w, h=d.h, score=d.score)
            for d in group_boxes(raw, min_neighbors)]


def _iou_matrix(boxes: np.ndarray) -> np.ndarray:
    x1, y1 = boxes[:, 0], boxes[:, 1]
    x2, y2 = boxes[:, 0] + boxes[:, 2], boxes[:, 1] + boxes[:, 3]
    ix = np.maximum(0, np.minimum(x2[:, None], x2[None, :])
                    - np.maximum(x1[:, None], x1[None, :]))
    iy = np.maximum(0, np.minimum(y2[:, None], y2[None, :])
                    - np.maximum(y1[:, None], y1[None, :]))
    inter = ix * iy
    areas = boxes[:, 2] * boxes[:, 3]
    union = areas[:, None] + areas[None, :] - inter
    return inter / union


def group_boxes(raw, min_neighbors: int = 0) -> list[Detection]:
    """Merge raw boxes into connected components under IoU >= 0.3.

    Each surviving component (size >= max(1, min_neighbors)) becomes one
    Detection at the coordinate-wise mean box with score = component size.
    The result is independent of the input order.
    """
    if not raw:
        return []
    boxes = np.asarray([(b.x, b.y, b.w, b.h) if isinstance(b, Detection) else tuple(b)
                        for b in raw], dtype=np.float64)
    adj = _iou_matrix(boxes) >= IOU_GROUP_THRESHOLD
    n = len(boxes)
    comp = np.full(n, -1, dtype=np.int64)
    next_comp = 0
    for i in range(n):
        if comp[i] >= 0:
            continue
        stack = [i]
        comp[i] = next_comp
        while stack:
            j = stack.pop()
            for k in np.nonzero(adj[j])[0]:
                if comp[k] < 0:
                    comp[k] = next_comp
                    stack.append(k)
        next_comp += 1
    need = max(1, min_neighbors)
    dets = []
    for c in range(next_comp):
        members = boxes[comp == c]
        if len(members) < need:
            continue
        mx, my, mw, mh = members.mean(axis=0)
        dets.append(Detection(int(round(mx)), int(round(my)),
                              int(round(mw)), int(round(mh)), float(len(members))))
    dets.sort(key=lambda d: (d.y, d.x, d.w, d.h))
    return dets
