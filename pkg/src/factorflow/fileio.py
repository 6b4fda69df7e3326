"""Middlebury ``.flo`` and binary PGM/PPM (P5/P6, maxval 255) files."""

from __future__ import annotations

import re
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagicError, FormatError, MissingInputError, ShapeError, TrailingDataError, TruncatedError, UnsupportedFormatError

FLO_MAGIC = 202021.25
_FLO_HEADER = struct.Struct("<fii")


def _read(path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"file not found: {path}")
    return path.read_bytes()


def encode_flo(flow: np.ndarray) -> bytes:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ShapeError(f"flow must be H x W x 2, got {flow.shape}")
    h, w, _ = flow.shape
    if h >= 2**31 or w >= 2**31:
        raise ShapeError(f"{h}x{w} flow does not fit 32-bit extents")
    return _FLO_HEADER.pack(FLO_MAGIC, w, h) + np.ascontiguousarray(flow, dtype="<f4").tobytes()


def decode_flo(buf: bytes) -> np.ndarray:
    if len(buf) >= 4 and buf[:4] != b"PIEH":
        raise BadMagicError(f"bad .flo magic {buf[:4]!r}, expected b'PIEH' (202021.25)")
    if len(buf) < _FLO_HEADER.size:
        raise TruncatedError(f".flo header needs {_FLO_HEADER.size} bytes, got {len(buf)}")
    _, w, h = _FLO_HEADER.unpack_from(buf)
    if w < 1 or h < 1:
        raise FormatError(f"invalid .flo extents {w}x{h}")
    need = 8 * w * h
    have = len(buf) - _FLO_HEADER.size
    if have < need:
        raise TruncatedError(f".flo payload has {have} bytes, {w}x{h} needs {need}")
    if have > need:
        raise TrailingDataError(f"{have - need} unexpected bytes after the .flo payload")
    return np.frombuffer(buf, dtype="<f4", offset=_FLO_HEADER.size).reshape(h, w, 2).astype(np.float32)


def write_flo(flow: np.ndarray, path) -> None:
    Path(path).write_bytes(encode_flo(flow))


def read_flo(path) -> np.ndarray:
    return decode_flo(_read(path))


_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def decode_pnm(buf: bytes) -> np.ndarray:
    """Raw samples of a P5 (``H x W``) or P6 (``H x W x 3``) file as uint8."""
    pos = 0
    tokens = []
    for _ in range(4):
        m = _TOKEN.match(buf, pos)
        if m is None:
            raise TruncatedError("image header ends early")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise UnsupportedFormatError(f"unsupported image magic {magic!r}; only binary P5/P6 are read")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"malformed image header {tokens!r}") from None
    if maxval != 255:
        raise UnsupportedFormatError(f"maxval {maxval} is not supported (255 only)")
    if w < 1 or h < 1:
        raise FormatError(f"invalid image extents {w}x{h}")
    if pos >= len(buf) or not buf[pos : pos + 1].isspace():
        raise TruncatedError("missing whitespace after the image header")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    need = w * h * channels
    data = buf[pos:]
    if len(data) < need:
        raise TruncatedError(f"image payload has {len(data)} bytes, needs {need}")
    if len(data) > need:
        raise TrailingDataError(f"{len(data) - need} unexpected bytes after the image payload")
    arr = np.frombuffer(data, dtype=np.uint8)
    return arr.reshape(h, w) if channels == 1 else arr.reshape(h, w, 3)


def to_gray(samples: np.ndarray) -> np.ndarray:
    """uint8 samples -> float32 intensities in [0, 1]; RGB uses Rec. 601 luma weights."""
    s = samples.astype(np.float64)
    if s.ndim == 3:
        s = 0.299 * s[..., 0] + 0.587 * s[..., 1] + 0.114 * s[..., 2]
    return np.clip(s / 255.0, 0.0, 1.0).astype(np.float32)


def read_pgm(path) -> np.ndarray:
    """Grayscale image in [0, 1] from a P5 or P6 file."""
    return to_gray(decode_pnm(_read(path)))


read_ppm = read_pgm


def _quantize(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def encode_pnm(img: np.ndarray) -> bytes:
    """P5 for ``H x W`` input, P6 for ``H x W x 3``; floats are read as [0, 1]."""
    q = _quantize(img)
    if q.ndim == 2:
        magic = b"P5"
    elif q.ndim == 3 and q.shape[2] == 3:
        magic = b"P6"
    else:
        raise ShapeError(f"image must be H x W or H x W x 3, got {q.shape}")
    h, w = q.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(q).tobytes()


def write_pgm(img: np.ndarray, path) -> None:
    if np.ndim(img) != 2:
        raise ShapeError(f"PGM output needs a 2-d image, got shape {np.shape(img)}")
    Path(path).write_bytes(encode_pnm(img))


def write_ppm(img: np.ndarray, path) -> None:
    """Write P6 for colour input; grayscale input is written as P5."""
    Path(path).write_bytes(encode_pnm(img))
