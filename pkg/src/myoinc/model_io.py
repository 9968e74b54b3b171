"""Binary model file (``MYOM``), little-endian throughout.

Layout: magic, u16 version, u16 d, u16 class count; per class u16 id,
u16-length-prefixed UTF-8 name, u32 count, d f64 mean, d*d f64 covariance;
then d*d f64 pooled covariance and f64 ridge.
"""
from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from myoinc.errors import BadMagicError, TruncatedFileError, VersionMismatchError
from myoinc.labels import MotionLabel
from myoinc.lda import ClassModel, PooledModel, _freeze, _pool

MAGIC = b"MYOM"
VERSION = 1


def model_to_bytes(model: PooledModel) -> bytes:
    d = model.dim
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HHH", VERSION, d, len(model.classes)))
    for c in model.classes:
        name = c.label.name.encode("utf-8")
        buf.write(struct.pack("<HH", c.label.id, len(name)))
        buf.write(name)
        buf.write(struct.pack("<I", c.count))
        buf.write(np.asarray(c.mean, dtype="<f8").tobytes())
        buf.write(np.asarray(c.cov, dtype="<f8").tobytes())
    buf.write(np.asarray(model.pooled_cov, dtype="<f8").tobytes())
    buf.write(struct.pack("<d", model.ridge))
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(
                f"file truncated: need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)


def model_from_bytes(data: bytes) -> PooledModel:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise BadMagicError("not a model file (bad magic)")
    version, d, k = r.unpack("<HHH")
    if version != VERSION:
        raise VersionMismatchError(f"model format version {version}, expected {VERSION}")
    classes = []
    for _ in range(k):
        cid, nlen = r.unpack("<HH")
        name = r.take(nlen).decode("utf-8")
        (count,) = r.unpack("<I")
        mean = r.floats(d)
        cov = r.floats(d * d).reshape(d, d)
        classes.append(ClassModel(MotionLabel(cid, name), _freeze(mean), _freeze(cov), count))
    pooled = r.floats(d * d).reshape(d, d)
    (ridge,) = r.unpack("<d")
    if r.pos != len(data):
        raise TruncatedFileError(f"{len(data) - r.pos} trailing bytes after model")
    # the pooling rule is not stored; the sum rule reproduces the matrix bit-for-bit
    pooling = "sum" if np.array_equal(_pool(classes, "sum"), pooled) else "weighted"
    return PooledModel(tuple(classes), _freeze(pooled), ridge, pooling)


def save_model(model: PooledModel, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path) -> PooledModel:
    return model_from_bytes(Path(path).read_bytes())
