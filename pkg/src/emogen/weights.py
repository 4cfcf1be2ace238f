"""Bit-exact weight archive.

Layout (all little-endian): magic ``EGC1``, u16 version (= 1), u32 tensor
count; per tensor a u16 name length + UTF-8 name, u8 rank, rank u32
extents, then the float32 payload; the file ends with the CRC-32 (IEEE)
of every preceding byte as a u32.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import ArchiveError
from .models import (MINI_XCEPTION, SIMPLE_CNN, Model, build_mini_xception,
                     build_simple_cnn4)

MAGIC = b"EGC1"
VERSION = 1


def pack_archive(tensors: dict[str, np.ndarray]) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HI", VERSION, len(tensors))
    for name, arr in tensors.items():
        data = np.ascontiguousarray(arr, dtype=np.float32)
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded))
        out += encoded
        out += struct.pack("<B", data.ndim)
        out += struct.pack(f"<{data.ndim}I", *data.shape)
        out += data.tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def unpack_archive(blob: bytes) -> dict[str, np.ndarray]:
    if len(blob) < 14:
        raise ArchiveError("archive too short")
    stored = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) != stored:
        raise ArchiveError("checksum mismatch: archive is corrupt")
    if blob[:4] != MAGIC:
        raise ArchiveError(f"bad magic {blob[:4]!r}")
    version, count = struct.unpack("<HI", blob[4:10])
    if version != VERSION:
        raise ArchiveError(f"unsupported archive version {version}")
    pos = 10
    end = len(blob) - 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        try:
            (name_len,) = struct.unpack("<H", blob[pos:pos + 2])
            pos += 2
            name = blob[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack("<B", blob[pos:pos + 1])
            pos += 1
            extents = struct.unpack(f"<{rank}I", blob[pos:pos + 4 * rank])
            pos += 4 * rank
            size = int(np.prod(extents)) if rank else 1
            payload = blob[pos:pos + 4 * size]
            if len(payload) != 4 * size:
                raise ArchiveError(f"truncated payload for tensor {name!r}")
            pos += 4 * size
        except struct.error:
            raise ArchiveError("truncated archive") from None
        if name in tensors:
            raise ArchiveError(f"duplicate tensor name {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(extents).copy()
    if pos != end:
        raise ArchiveError(f"{end - pos} trailing bytes after last tensor")
    return tensors


def save_archive(tensors: dict[str, np.ndarray], path):
    with open(path, "wb") as fh:
        fh.write(pack_archive(tensors))


def load_archive(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        return unpack_archive(fh.read())


def save_model(model: Model, path):
    """Archive every parameter and running statistic of the model's members."""
    tensors = {}
    tensors.update(model.named_params())
    tensors.update(model.named_state())
    save_archive(tensors, path)


_BUILDERS = {MINI_XCEPTION: build_mini_xception, SIMPLE_CNN: build_simple_cnn4}
_CLASS_COUNT_KEYS = {MINI_XCEPTION: "head_conv/bias", SIMPLE_CNN: "fc/bias"}


def load_model(path) -> Model:
    """Rebuild the archived model; member kinds and class counts are inferred
    from the tensor names and head shapes."""
    tensors = load_archive(path)
    kinds = sorted({name.split("/", 1)[0] for name in tensors})
    members = {}
    for kind in kinds:
        if kind not in _BUILDERS:
            raise ArchiveError(f"unknown member network {kind!r} in archive")
        head = f"{kind}/{_CLASS_COUNT_KEYS[kind]}"
        if head not in tensors:
            raise ArchiveError(f"archive is missing tensor {head!r}")
        class_count = int(tensors[head].shape[0])
        members[kind] = _BUILDERS[kind](class_count)
    model = Model(members)
    expected = {}
    expected.update(model.named_params())
    expected.update(model.named_state())
    missing = sorted(set(expected) - set(tensors))
    extra = sorted(set(tensors) - set(expected))
    if missing or extra:
        raise ArchiveError(f"archive does not match the model schema: "
                           f"missing {missing[:3]}, unexpected {extra[:3]}")
    for name, target in expected.items():
        src = tensors[name]
        if src.shape != target.shape:
            raise ArchiveError(f"tensor {name!r} has shape {src.shape}, "
                               f"expected {target.shape}")
        target[...] = src
    return model
