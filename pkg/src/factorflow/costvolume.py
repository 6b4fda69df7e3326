"""Full 3D cost volumes from 1D correlation, and flow-guided lookups.

``horizontal`` volumes are ``H x W x W`` with entry ``(h, w, k)`` the scaled
dot product of source pixel ``(h, w)`` and attended target pixel ``(h, k)``;
``vertical`` volumes are ``H x W x H`` and correlate ``(h, w)`` with
``(k, w)``.  A lookup slab has ``2R + 1`` channels, channel ``R + r`` holding
displacement ``r``.  Concatenated slabs put the horizontal channels first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import grid
from .errors import ShapeError

DIRECTIONS = ("horizontal", "vertical")


@dataclass(frozen=True)
class CostVolume:
    direction: str
    values: np.ndarray

    @property
    def nbytes(self) -> int:
        return self.values.nbytes

    @property
    def size(self) -> int:
        return self.values.size


def _check(f1, f2a, direction):
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if np.ndim(f1) != 3 or np.shape(f1) != np.shape(f2a):
        raise ShapeError(f"feature shapes differ or are not H x W x D: {np.shape(f1)} vs {np.shape(f2a)}")


def correlate_full(f1: np.ndarray, f2_attended: np.ndarray, direction: str) -> CostVolume:
    """Precompute the whole volume as one batched matrix product.

    Pair ``vertical``-attended targets with the ``horizontal`` direction and
    vice versa.
    """
    _check(f1, f2_attended, direction)
    h, w, d = f1.shape
    scale = 1.0 / math.sqrt(d)
    if direction == "horizontal":
        out = grid.matmul_last2(f1, grid.permute(f2_attended, (0, 2, 1)))
    else:
        out = np.empty((h, w, h), dtype=np.result_type(f1, f2_attended))
        grid.matmul_last2(
            grid.permute(f1, (1, 0, 2)),
            grid.permute(f2_attended, (1, 2, 0)),
            out=grid.permute(out, (1, 0, 2)),
        )
    out *= scale
    return CostVolume(direction, out)


def correlate_vjp(f1, f2_attended, direction: str, upstream) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``sum(upstream * correlate_full(...).values)`` w.r.t. both features."""
    _check(f1, f2_attended, direction)
    h, w, d = f1.shape
    want = (h, w, w) if direction == "horizontal" else (h, w, h)
    if np.shape(upstream) != want:
        raise ShapeError(f"upstream gradient must be {want}, got {np.shape(upstream)}")
    scale = 1.0 / math.sqrt(d)
    if direction == "horizontal":
        g1 = grid.matmul_last2(upstream, f2_attended)
        g2 = grid.matmul_last2(grid.permute(upstream, (0, 2, 1)), f1)
    else:
        ub = grid.permute(upstream, (1, 0, 2))
        g1 = grid.matmul_last2(ub, grid.permute(f2_attended, (1, 0, 2)))
        g2 = grid.matmul_last2(grid.permute(ub, (0, 2, 1)), grid.permute(f1, (1, 0, 2)))
        g1 = np.ascontiguousarray(grid.permute(g1, (1, 0, 2)))
        g2 = np.ascontiguousarray(grid.permute(g2, (1, 0, 2)))
    return g1 * scale, g2 * scale


def sample_linear(values: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Sample ``values[..., :]`` at fractional positions ``pos`` along the last axis.

    Linear interpolation; taps outside ``[0, L-1]`` read as zero, so a position
    at or beyond one cell past either border yields exactly zero.
    """
    length = values.shape[-1]
    p0 = np.floor(pos)
    t = (pos - p0).astype(values.dtype)
    i0 = p0.astype(np.int64)
    i1 = i0 + 1
    ok0 = (i0 >= 0) & (i0 < length)
    ok1 = (i1 >= 0) & (i1 < length)
    v0 = np.take_along_axis(values, np.clip(i0, 0, length - 1), axis=-1)
    v1 = np.take_along_axis(values, np.clip(i1, 0, length - 1), axis=-1)
    v0 = np.where(ok0, v0, 0)
    v1 = np.where(ok1, v1, 0)
    return ((1 - t) * v0 + t * v1).astype(values.dtype, copy=False)


def lookup(cv: CostVolume, flow: np.ndarray, radius: int) -> np.ndarray:
    """``H x W x (2R+1)`` window of ``cv`` centred on the current flow.

    The horizontal volume follows ``fx`` (channel 0), the vertical one ``fy``
    (channel 1).
    """
    if radius < 1:
        raise ValueError(f"lookup radius must be >= 1, got {radius}")
    h, w = cv.values.shape[:2]
    if np.shape(flow) != (h, w, 2):
        raise ShapeError(f"flow must be {h}x{w}x2, got {np.shape(flow)}")
    if not np.all(np.isfinite(flow)):
        raise ValueError("flow contains non-finite values")
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    if cv.direction == "horizontal":
        base = np.arange(w, dtype=np.float64)[None, :] + flow[..., 0]
    else:
        base = np.arange(h, dtype=np.float64)[:, None] + flow[..., 1]
    return sample_linear(cv.values, base[..., None] + offsets)


def concat_lookups(hslab: np.ndarray, vslab: np.ndarray) -> np.ndarray:
    if hslab.shape != vslab.shape or hslab.ndim != 3 or hslab.shape[-1] % 2 != 1:
        raise ShapeError(f"slabs must share an H x W x (2R+1) shape, got {hslab.shape} and {vslab.shape}")
    return np.concatenate([hslab, vslab], axis=-1)


def split_lookups(slab: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = slab.shape[-1]
    if c % 2 or (c // 2) % 2 != 1:
        raise ShapeError(f"concatenated slab needs 2(2R+1) channels, got {c}")
    return slab[..., : c // 2], slab[..., c // 2 :]
