"""Detect -> crop -> classify pipeline shared by the CLI and the benchmark."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import FACE_SIZE, EmotionLabel, preprocess, resize_bilinear
from .detect import (DEFAULT_MIN_NEIGHBORS, DEFAULT_MIN_SIZE,
                     DEFAULT_SCALE_FACTOR, CascadeModel, Detection, detect_faces)
from .models import Model, predict_emotion, predict_gender

CROP_MARGIN = 0.10


@dataclass
class FaceResult:
    box: Detection
    emotion: EmotionLabel
    emotion_probs: np.ndarray
    gender: str
    gender_probs: np.ndarray


@dataclass
class FrameResult:
    faces: list[FaceResult] = field(default_factory=list)
    detect_ms: float = 0.0
    classify_ms: float = 0.0
    total_ms: float = 0.0


@dataclass
class DetectorParams:
    scale_factor: float = DEFAULT_SCALE_FACTOR
    min_neighbors: int = DEFAULT_MIN_NEIGHBORS
    min_size: int = DEFAULT_MIN_SIZE


def expand_box(det: Detection, img_h: int, img_w: int,
               margin: float = CROP_MARGIN) -> tuple[int, int, int, int]:
    """Detector box grown by ``margin`` per side, clamped to the image."""
    dx = int(round(det.w * margin))
    dy = int(round(det.h * margin))
    x0 = max(0, det.x - dx)
    y0 = max(0, det.y - dy)
    x1 = min(img_w, det.x + det.w + dx)
    y1 = min(img_h, det.y + det.h + dy)
    return x0, y0, x1 - x0, y1 - y0


def crop_face(img: np.ndarray, det: Detection):
    x, y, w, h = expand_box(det, img.shape[0], img.shape[1])
    patch = resize_bilinear(img[y:y + h, x:x + w], FACE_SIZE, FACE_SIZE)
    return preprocess(np.clip(patch, 0.0, 255.0))


def classify_face(img, det, emotion_model: Model, gender_model: Model) -> FaceResult:
    face = crop_face(img, det)
    emotion, eprobs = predict_emotion(emotion_model, face)
    gender, gprobs = predict_gender(gender_model, face)
    return FaceResult(det, emotion, eprobs, gender, gprobs)


def process_frame(img: np.ndarray, cascade: CascadeModel, emotion_model: Model,
                  gender_model: Model, params: DetectorParams | None = None) -> FrameResult:
    params = params or DetectorParams()
    t0 = time.perf_counter()
    dets = detect_faces(cascade, img, params.scale_factor,
                        params.min_neighbors, params.min_size)
    t1 = time.perf_counter()
    faces = [classify_face(img, det, emotion_model, gender_model) for det in dets]
    t2 = time.perf_counter()
    return FrameResult(faces=faces,
                       detect_ms=(t1 - t0) * 1e3,
                       classify_ms=(t2 - t1) * 1e3,
                       total_ms=(t2 - t0) * 1e3)


def draw_box(img: np.ndarray, det: Detection) -> np.ndarray:
    """White 1-px rectangle outline; labels stay on the text stream."""
    out = img.copy()
    x0, y0 = max(0, det.x), max(0, det.y)
    x1 = min(img.shape[1] - 1, det.x + det.w - 1)
    y1 = min(img.shape[0] - 1, det.y + det.h - 1)
    out[y0, x0:x1 + 1] = 255
    out[y1, x0:x1 + 1] = 255
    out[y0:y1 + 1, x0] = 255
    out[y0:y1 + 1, x1] = 255
    return out


def bench(emotion_model: Model, gender_model: Model, cascade: CascadeModel,
          frames: int, size: tuple[int, int] = (640, 480), seed: int = 0,
          params: DetectorParams | None = None) -> dict:
    """Push seeded synthetic frames through the full pipeline.

    When a frame yields no detections the classifier heads still run once
    on a center crop, so the classify stage is always measured. Returns
    min/median/p95 per stage plus per-frame samples, in milliseconds.
    """
    w, h = size
    rng = np.random.default_rng(seed)
    detect_t, classify_t, total_t = [], [], []
    for _ in range(frames):
        frame = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
        result = process_frame(frame, cascade, emotion_model, gender_model, params)
        if not result.faces:
            side = min(h, w) // 2
            det = Detection((w - side) // 2, (h - side) // 2, side, side, 0.0)
            t0 = time.perf_counter()
            classify_face(frame, det, emotion_model, gender_model)
            extra = (time.perf_counter() - t0) * 1e3
            result.classify_ms += extra
            result.total_ms += extra
        detect_t.append(result.detect_ms)
        classify_t.append(result.classify_ms)
        total_t.append(result.total_ms)
    def stats(xs):
        arr = np.asarray(xs)
        return {"min": float(arr.min()),
                "median": float(np.median(arr)),
                "p95": float(np.percentile(arr, 95))}
    return {"frames": frames,
            "detect": stats(detect_t),
            "classify": stats(classify_t),
            "total": stats(total_t),
            "samples": {"detect": detect_t, "classify": classify_t, "total": total_t}}
