"""``F1DW`` named-tensor weight files.

Layout (little-endian)::

    "F1DW" | u32 count | count x ( u16 name_len | name | u8 ndim | ndim x u32 | f32 payload )

Tensor order is preserved, so decoding and re-encoding a file reproduces it
byte for byte.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ExtentOverflowError,
    FormatError,
    MissingInputError,
    TrailingDataError,
    TruncatedError,
)

WEIGHT_MAGIC = b"F1DW"
_MAX_ELEMS = 1 << 38


def encode_weights(tensors: dict) -> bytes:
    parts = [WEIGHT_MAGIC, struct.pack("<I", len(tensors))]
    for name, value in tensors.items():
        raw = name.encode("utf-8")
        arr = np.asarray(value, dtype="<f4")
        if len(raw) > 0xFFFF or arr.ndim > 0xFF:
            raise FormatError(f"tensor {name!r} cannot be encoded")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedError(f"file ends inside {what} at offset {self.pos}")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_weights(buf: bytes) -> dict[str, np.ndarray]:
    r = _Reader(buf)
    magic = buf[:4]
    if len(magic) == 4 and magic != WEIGHT_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected 'F1DW'")
    r.take(4, "magic")
    (count,) = r.unpack("<I", "tensor count")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H", "name length")
        try:
            name = r.take(nlen, "tensor name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"tensor name at offset {r.pos - nlen} is not UTF-8") from None
        if name in tensors:
            raise FormatError(f"duplicate tensor name {name!r}")
        (ndim,) = r.unpack("<B", f"header of {name!r}")
        dims = r.unpack(f"<{ndim}I", f"extents of {name!r}")
        n = int(np.prod(dims, dtype=object)) if dims else 1
        if n > _MAX_ELEMS:
            raise ExtentOverflowError(f"tensor {name!r} claims {n} elements")
        payload = r.take(4 * n, f"payload of {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
    if r.pos != len(buf):
        raise TrailingDataError(f"{len(buf) - r.pos} unexpected bytes after the last tensor")
    return tensors


def read_weights(path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"weights file not found: {path}")
    return decode_weights(path.read_bytes())


def write_weights(tensors: dict, path) -> None:
    Path(path).write_bytes(encode_weights(tensors))
