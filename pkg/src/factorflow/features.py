"""Hand-crafted 1/8-resolution features and the ``F1DF`` feature file format.

The featurizer stands in for a learned backbone.  Each 8x8 cell of the image
becomes one feature vector::

    [mean, mean Sobel-x, mean Sobel-y, variance, cos_1, ..., cos_{d-4}]

where ``cos_k`` projects the row-major flattened patch onto
``sqrt(2/64) * cos(pi * k * (n + 0.5) / 64)``.  Vectors are scaled to unit
L2 norm; an all-zero vector (black cell) maps to the uniform unit vector.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from . import grid
from .errors import (
    BadMagicError,
    ExtentOverflowError,
    FormatError,
    MissingInputError,
    ShapeError,
    TrailingDataError,
    TruncatedError,
)

CELL = 8
FEATURE_MAGIC = b"F1DF"
_HEADER = struct.Struct("<4sIII")
_MAX_PAYLOAD = 1 << 40


def _cosine_bank(n_freq: int) -> np.ndarray:
    n = np.arange(CELL * CELL, dtype=np.float64)[:, None]
    k = np.arange(1, n_freq + 1, dtype=np.float64)[None, :]
    return math.sqrt(2.0 / (CELL * CELL)) * np.cos(np.pi * k * (n + 0.5) / (CELL * CELL))


def _sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.pad(img, 1, mode="edge")
    gx = (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    gy = (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    return gx / 8.0, gy / 8.0


def _cells(a: np.ndarray) -> np.ndarray:
    h, w = a.shape[0] // CELL, a.shape[1] // CELL
    return a.reshape(h, CELL, w, CELL).transpose(0, 2, 1, 3).reshape(h, w, CELL * CELL)


def featurize_image(img: np.ndarray, d: int = 64) -> np.ndarray:
    """Deterministic ``ceil(H/8) x ceil(W/8) x d`` float32 features of a gray image."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"expected a 2-d grayscale image, got shape {img.shape}")
    if img.shape[0] < CELL or img.shape[1] < CELL:
        raise ShapeError(f"image must be at least {CELL}x{CELL}, got {img.shape[0]}x{img.shape[1]}")
    if d < 8 or d % 4:
        raise ShapeError(f"channel count must be a multiple of 4 and >= 8, got {d}")
    if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image intensities must lie in [0, 1]")

    height, width = img.shape
    pad_h = -height % CELL
    pad_w = -width % CELL
    img = np.pad(img, ((0, pad_h), (0, pad_w)), mode="edge")

    gx, gy = _sobel(img)
    patch = _cells(img)
    # variance about the first pixel keeps a constant cell at exactly zero
    dev = patch - patch[..., :1]
    var = np.maximum((dev * dev).mean(axis=-1) - dev.mean(axis=-1) ** 2, 0.0)

    out = np.empty(patch.shape[:2] + (d,), dtype=np.float64)
    out[..., 0] = patch.mean(axis=-1)
    out[..., 1] = _cells(gx).mean(axis=-1)
    out[..., 2] = _cells(gy).mean(axis=-1)
    out[..., 3] = var
    out[..., 4:] = grid.linear(patch, _cosine_bank(d - 4))

    norm = np.sqrt((out * out).sum(axis=-1, keepdims=True))
    zero = norm[..., 0] == 0.0
    out[zero] = 1.0
    norm[zero] = math.sqrt(d)
    return (out / norm).astype(grid.DTYPE)


def random_unit_features(h: int, w: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. Gaussian feature vectors scaled to unit norm (test fixtures, demos)."""
    f = rng.standard_normal((h, w, d))
    f /= np.linalg.norm(f, axis=-1, keepdims=True)
    return f.astype(grid.DTYPE)


def encode_features(fm: np.ndarray) -> bytes:
    fm = np.asarray(fm)
    if fm.ndim != 3:
        raise ShapeError(f"feature map must be h x w x d, got shape {fm.shape}")
    h, w, d = fm.shape
    return _HEADER.pack(FEATURE_MAGIC, h, w, d) + np.ascontiguousarray(fm, dtype="<f4").tobytes()


def decode_features(buf: bytes) -> np.ndarray:
    if len(buf) < _HEADER.size:
        if len(buf) >= 4 and buf[:4] != FEATURE_MAGIC:
            raise BadMagicError(f"bad magic {buf[:4]!r}, expected 'F1DF'")
        raise TruncatedError(f"feature header needs {_HEADER.size} bytes, file has {len(buf)}")
    magic, h, w, d = _HEADER.unpack_from(buf)
    if magic != FEATURE_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected 'F1DF'")
    if h == 0 or w == 0 or d == 0:
        raise FormatError(f"feature extents must be positive, got {h}x{w}x{d}")
    nbytes = 4 * h * w * d
    if nbytes > _MAX_PAYLOAD:
        raise ExtentOverflowError(f"extents {h}x{w}x{d} imply a {nbytes}-byte payload")
    payload = len(buf) - _HEADER.size
    if payload < nbytes:
        raise TruncatedError(f"payload has {payload} bytes, extents {h}x{w}x{d} need {nbytes}")
    if payload > nbytes:
        raise TrailingDataError(f"{payload - nbytes} unexpected bytes after the payload")
    fm = np.frombuffer(buf, dtype="<f4", offset=_HEADER.size).reshape(h, w, d)
    if not np.all(np.isfinite(fm)):
        raise FormatError("feature payload contains non-finite values")
    return fm.astype(grid.DTYPE)


def load_features(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"feature file not found: {path}")
    return decode_features(path.read_bytes())


def save_features(fm: np.ndarray, path) -> None:
    Path(path).write_bytes(encode_features(fm))
