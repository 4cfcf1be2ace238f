"""Shared fixtures: the hand-built detector pattern/cascade and tiny datasets."""

import json

import numpy as np
import pytest

# 24x24 synthetic "face": 2-px black frame around xor-arranged dark/bright
# quadrants. Two cascade features key on it: the quadrant contrast (A) and
# the frame ring (B); thresholds were chosen from measured responses so
# that only positions within 1 px of a planted pattern pass both.
PATTERN_WINDOW = 24
XOR_RECTS = [[2, 2, 10, 10, 1.0], [12, 2, 10, 10, -1.0],
             [2, 12, 10, 10, -1.0], [12, 12, 10, 10, 1.0]]
FRAME_RECTS = [[0, 0, 24, 24, 1.0], [2, 2, 20, 20, -1.0]]


def make_pattern() -> np.ndarray:
    p = np.full((24, 24), 128, np.uint8)
    p[2:12, 2:12] = 28
    p[2:12, 12:22] = 228
    p[12:22, 2:12] = 228
    p[12:22, 12:22] = 28
    p[:2, :] = 0
    p[22:, :] = 0
    p[:, :2] = 0
    p[:, 22:] = 0
    return p


def inverted_pattern() -> np.ndarray:
    return (255 - make_pattern().astype(np.int16)).astype(np.uint8)


def cascade_dict() -> dict:
    return {
        "window_w": 24,
        "window_h": 24,
        "stages": [
            {"threshold": 0.5,
             "weak": [{"rects": XOR_RECTS, "threshold": -0.55, "left": 1.0, "right": 0.0}]},
            {"threshold": 0.5,
             "weak": [{"rects": FRAME_RECTS, "threshold": 0.15, "left": 1.0, "right": 0.0}]},
        ],
    }


def plant(img: np.ndarray, x: int, y: int) -> np.ndarray:
    img = img.copy()
    img[y:y + 24, x:x + 24] = make_pattern()
    return img


def two_face_image() -> tuple[np.ndarray, list[tuple[int, int]]]:
    img = np.full((64, 96), 128, np.uint8)
    img = plant(img, 10, 8)
    img = plant(img, 60, 30)
    return img, [(10, 8), (60, 30)]


@pytest.fixture
def test_cascade():
    from emogen.detect import CascadeModel
    return CascadeModel.from_dict(cascade_dict())


@pytest.fixture
def cascade_file(tmp_path):
    path = tmp_path / "cascade.json"
    path.write_text(json.dumps(cascade_dict()))
    return path


def write_fer_csv(path, rows):
    """rows: iterable of (emotion, pixels-1d, usage)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("emotion,pixels,Usage\n")
        for emotion, pixels, usage in rows:
            fh.write(f"{emotion},{' '.join(str(int(v)) for v in pixels)},{usage}\n")
    return path


def synthetic_fer_rows(n, seed=0, usage="Training", class_count=7):
    """Learnable toy faces: each class gets a distinct blocky template plus noise."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        label = i % class_count
        base = np.full((48, 48), 40 + 25 * label, dtype=np.float64)
        gy, gx = divmod(label, 3)
        base[8 + 10 * gy: 24 + 10 * gy, 8 + 10 * gx: 24 + 10 * gx] += 90
        noisy = np.clip(base + rng.normal(0, 18, size=(48, 48)), 0, 255)
        rows.append((label, noisy.astype(np.uint8).ravel(), usage))
    return rows
