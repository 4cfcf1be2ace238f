"""Dataset parsing, image decoding, and the shared preprocessing contract.

The engine consumes exactly three external formats: the FER-style CSV
(``emotion,pixels,Usage``), the gender manifest CSV
(``path,gender,face_score,second_face_score``), and binary 8-bit PGM
(``P5``, maxval 255). Anything else is converted up front by the prep
tool.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DecodeError, LabelError, ParseError, ShapeError
from .tensor import Tensor

EMOTIONS = ("angry", "disgust", "fear", "happy", "sad", "surprise", "neutral")
GENDERS = ("female", "male")
FER_USAGES = ("Training", "PublicTest", "PrivateTest")
FACE_SIZE = 48
MIN_FACE_SCORE = 3.0


@dataclass(frozen=True)
class EmotionLabel:
    """One of the seven emotion classes; index and name are a fixed bijection."""

    index: int

    def __post_init__(self):
        if not 0 <= self.index < len(EMOTIONS):
            raise LabelError(f"emotion index must be 0..6, got {self.index}")

    @property
    def name(self) -> str:
        return EMOTIONS[self.index]

    @classmethod
    def from_name(cls, name: str) -> "EmotionLabel":
        try:
            return cls(EMOTIONS.index(name))
        except ValueError:
            raise LabelError(f"unknown emotion name {name!r}") from None


@dataclass
class FerSample:
    pixels: np.ndarray  # (48, 48) uint8
    label: int          # 0..6
    usage: str          # Training | PublicTest | PrivateTest


@dataclass
class GenderManifestRow:
    image_path: str
    gender: int                      # 0 = female, 1 = male
    face_score: float
    second_face_score: float | None  # None = absent


def load_fer_csv(path) -> list[FerSample]:
    """Parse a FER CSV; every row must be well-formed or the row is rejected
    with a ParseError naming its 1-based data-row number."""
    samples = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["emotion", "pixels", "Usage"]:
            raise ParseError(0, f"expected header emotion,pixels,Usage, got {header}")
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(row_no, f"expected 3 columns, got {len(row)}")
            emotion_s, pixels_s, usage = row
            try:
                emotion = int(emotion_s)
            except ValueError:
                raise ParseError(row_no, f"non-integer emotion {emotion_s!r}") from None
            if not 0 <= emotion <= 6:
                raise ParseError(row_no, f"emotion {emotion} outside [0, 6]")
            try:
                px = np.array(pixels_s.split(), dtype=np.int32)
            except ValueError:
                raise ParseError(row_no, "non-integer pixel value") from None
            if px.size != FACE_SIZE * FACE_SIZE:
                raise ParseError(row_no, f"expected 2304 pixels, got {px.size}")
            if px.min() < 0 or px.max() > 255:
                raise ParseError(row_no, "pixel value outside [0, 255]")
            if usage not in FER_USAGES:
                raise ParseError(row_no, f"unknown usage {usage!r}")
            samples.append(FerSample(px.astype(np.uint8).reshape(FACE_SIZE, FACE_SIZE),
                                     emotion, usage))
    return samples


def load_gender_manifest(path) -> list[GenderManifestRow]:
    """Parse the gender manifest, keeping only rows with face_score >= 3 and
    no second face; order is preserved."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["path", "gender", "face_score", "second_face_score"]:
            raise ParseError(0, "expected header path,gender,face_score,second_face_score, "
                             f"got {header}")
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(row_no, f"expected 4 columns, got {len(row)}")
            path_s, gender_s, score_s, second_s = row
            if gender_s not in ("0", "1"):
                raise ParseError(row_no, f"gender must be 0 or 1, got {gender_s!r}")
            try:
                score = float(score_s)
            except ValueError:
                raise ParseError(row_no, f"bad face_score {score_s!r}") from None
            second = None
            if second_s.strip():
                try:
                    second = float(second_s)
                except ValueError:
                    raise ParseError(row_no, f"bad second_face_score {second_s!r}") from None
            if score >= MIN_FACE_SCORE and second is None:
                rows.append(GenderManifestRow(path_s, int(gender_s), score, second))
    return rows


# ---------------------------------------------------------------------------
# PGM (binary P5, maxval 255)


class _Truncated(DecodeError):
    """PGM data ends mid-image; a stream may complete it with more bytes."""


def _pgm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited header token, skipping '#' comments."""
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c in b" \t\r\n":
            pos += 1
        elif c == b"#":
            while pos < n and data[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in b" \t\r\n":
        pos += 1
    if start == pos:
        raise _Truncated("truncated PGM header")
    return data[start:pos], pos


def parse_pgm(data: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one P5 image starting at ``offset``; returns (matrix, next offset)."""
    magic, pos = _pgm_token(data, offset)
    if magic != b"P5":
        raise DecodeError(f"unsupported magic {magic!r}, need binary P5")
    fields = []
    for _ in range(3):
        tok, pos = _pgm_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise DecodeError(f"bad PGM header token {tok!r}") from None
    w, h, maxval = fields
    if maxval != 255:
        raise DecodeError(f"maxval must be 255, got {maxval}")
    if w < 1 or h < 1:
        raise DecodeError(f"bad PGM dimensions {w}x{h}")
    pos += 1  # single whitespace byte after maxval
    end = pos + w * h
    if end > len(data):
        raise _Truncated(f"truncated PGM payload: need {w * h} bytes, have {len(data) - pos}")
    img = np.frombuffer(data[pos:end], dtype=np.uint8).reshape(h, w)
    return img.copy(), end


def decode_image(source) -> np.ndarray:
    """Read a binary P5 PGM from a path or a bytes object into (H, W) uint8."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    img, _ = parse_pgm(data)
    return img


def encode_pgm(img: np.ndarray) -> bytes:
    if img.ndim != 2:
        raise ShapeError(f"PGM images are 2-D, got shape {img.shape}")
    h, w = img.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def write_pgm(path, img: np.ndarray):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))


def read_pgm_stream(stream, chunk_size: int = 1 << 16):
    """Yield images from a concatenated stream of binary P5 frames.

    Frames are parsed as soon as their bytes arrive, so a live feed works;
    a frame left incomplete at end of stream raises DecodeError.
    """
    buf = b""
    eof = False
    while True:
        while True:
            start = 0
            while start < len(buf) and buf[start:start + 1] in b" \t\r\n":
                start += 1
            buf = buf[start:]
            if not buf:
                break
            try:
                img, end = parse_pgm(buf)
            except _Truncated:
                if eof:
                    raise
                break  # wait for more bytes
            yield img
            buf = buf[end:]
        if eof:
            return
        chunk = stream.read(chunk_size)
        if not chunk:
            eof = True
            if not buf.strip():
                return
        else:
            buf += chunk


# ---------------------------------------------------------------------------
# resizing and the preprocessing contract


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel-center sampling, clamped at borders."""
    if img.ndim != 2:
        raise ShapeError(f"resize_bilinear expects a 2-D matrix, got {img.shape}")
    if out_h < 1 or out_w < 1:
        raise ShapeError("output extents must be >= 1")
    src = img.astype(np.float64, copy=False)
    in_h, in_w = src.shape
    ys = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


def preprocess(face: np.ndarray) -> Tensor:
    """Map a 48x48 image with values in 0..255 onto a (1, 1, 48, 48) tensor
    in [-1, 1]: x/255 shifted to zero center and doubled."""
    arr = np.asarray(face)
    if arr.shape != (FACE_SIZE, FACE_SIZE):
        raise ShapeError(f"preprocess expects 48x48 input, got {arr.shape}")
    scaled = (arr.astype(np.float32) / 255.0 - 0.5) * 2.0
    return Tensor(scaled[None, None, :, :], dtype=np.float32)


def preprocess_batch(faces: np.ndarray) -> np.ndarray:
    """Vectorized preprocess for (n, 48, 48) stacks -> (n, 1, 48, 48) float32."""
    if faces.ndim != 3 or faces.shape[1:] != (FACE_SIZE, FACE_SIZE):
        raise ShapeError(f"expected (n, 48, 48), got {faces.shape}")
    return ((faces.astype(np.float32) / 255.0 - 0.5) * 2.0)[:, None, :, :]


@dataclass
class Dataset:
    """Preprocessed images plus integer labels, ready for the trainer."""

    images: np.ndarray  # (n, 1, 48, 48) float32 in [-1, 1]
    labels: np.ndarray  # (n,) int64

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataError(f"{len(self.images)} images vs {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    @classmethod
    def from_fer(cls, samples: list[FerSample]) -> "Dataset":
        if not samples:
            raise DataError("empty FER sample list")
        faces = np.stack([s.pixels for s in samples])
        labels = np.array([s.label for s in samples], dtype=np.int64)
        return cls(preprocess_batch(faces), labels)

    @classmethod
    def from_arrays(cls, faces: np.ndarray, labels) -> "Dataset":
        if len(faces) == 0:
            raise DataError("empty dataset")
        return cls(preprocess_batch(faces), np.asarray(labels, dtype=np.int64))
