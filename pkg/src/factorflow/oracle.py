"""Brute-force references for the factorized construction.

Everything here runs in float64 and is meant for desk-scale grids.  The
all-pairs volume is refused above ``MAX_CELLS`` pixels.
"""

from __future__ import annotations

import math

import numpy as np

from .attention import aggregate
from .errors import CapExceededError, ShapeError
from .pipeline import FlowModel, build_volumes, concatenated_slab, lookup_both, volumes_from_attention

MAX_CELLS = 1024


def allpairs_4d(f1: np.ndarray, f2: np.ndarray, max_cells: int = MAX_CELLS) -> np.ndarray:
    """``H x W x H x W`` volume, entry ``(h, w, i, j) = f1[h, w] . f2[i, j] / sqrt(D)``."""
    if f1.shape != f2.shape or f1.ndim != 3:
        raise ShapeError(f"feature shapes differ or are not H x W x D: {f1.shape} vs {f2.shape}")
    h, w, d = f1.shape
    if h * w > max_cells:
        raise CapExceededError(f"all-pairs volume refused: {h}x{w} = {h * w} cells exceeds the cap of {max_cells}")
    a = np.asarray(f1, dtype=np.float64).reshape(h * w, d)
    b = np.asarray(f2, dtype=np.float64).reshape(h * w, d)
    return (a @ b.T).reshape(h, w, h, w) / math.sqrt(d)


def expand_factorized(h: int, w: int, r: int, attn: np.ndarray, f1, f2, direction: str = "horizontal") -> float:
    """One cost entry from the expanded sum over attention weights and raw dot products.

    ``horizontal`` (vertical attention ``attn[w', h', i]``)::

        sum_i attn[w + r, h, i] * (f1[h, w] . f2[i, w + r]) / sqrt(D)

    ``vertical`` (horizontal attention ``attn[h', w', j]``)::

        sum_j attn[h + r, w, j] * (f1[h, w] . f2[h + r, j]) / sqrt(D)
    """
    hh, ww, d = f1.shape
    src = np.asarray(f1[h, w], dtype=np.float64)
    if direction == "horizontal":
        col = w + r
        if not 0 <= col < ww or not 0 <= h < hh:
            raise IndexError(f"entry ({h}, {w}, r={r}) is outside a {hh}x{ww} grid")
        terms = [float(attn[col, h, i]) * float(src @ np.asarray(f2[i, col], dtype=np.float64)) for i in range(hh)]
    elif direction == "vertical":
        row = h + r
        if not 0 <= row < hh or not 0 <= w < ww:
            raise IndexError(f"entry ({h}, {w}, r={r}) is outside a {hh}x{ww} grid")
        terms = [float(attn[row, w, j]) * float(src @ np.asarray(f2[row, j], dtype=np.float64)) for j in range(ww)]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return math.fsum(terms) / math.sqrt(d)


def expand_factorized_volume(attn: np.ndarray, f1, f2, direction: str = "horizontal") -> np.ndarray:
    """All entries of the expanded sum at once, built on the all-pairs volume.

    Returns ``H x W x W`` (horizontal) or ``H x W x H`` (vertical), indexed by
    absolute target coordinate like ``correlate_full``.
    """
    pairs = allpairs_4d(f1, f2, max_cells=np.inf)
    a = np.asarray(attn, dtype=np.float64)
    if direction == "horizontal":
        # out[h, w, k] = sum_i a[k, h, i] * pairs[h, w, i, k]
        return np.einsum("khi,hwik->hwk", a, pairs)
    if direction == "vertical":
        # out[h, w, k] = sum_j a[k, w, j] * pairs[h, w, k, j]
        return np.einsum("kwj,hwkj->hwk", a, pairs)
    raise ValueError(f"unknown direction {direction!r}")


def oracle_attention(shift: int, h: int, w: int, axis: str = "vertical") -> np.ndarray:
    """Delta attention that moves every query ``shift`` cells along ``axis``, clamped at the border.

    Vertical: ``W x H x H`` with ``A[w, h, i] = [i == clamp(h + shift)]``.
    Horizontal: ``H x W x W`` with ``A[h, w, j] = [j == clamp(w + shift)]``.
    """
    n, batch = (h, w) if axis == "vertical" else (w, h)
    if axis not in ("vertical", "horizontal"):
        raise ValueError(f"unknown axis {axis!r}")
    if abs(shift) >= n:
        raise ValueError(f"|shift| = {abs(shift)} must be below the {axis} extent {n}")
    target = np.clip(np.arange(n) + shift, 0, n - 1)
    eye = np.zeros((n, n), dtype=np.float32)
    eye[np.arange(n), target] = 1.0
    return np.broadcast_to(eye, (batch, n, n)).copy()


def shift_features(f: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Target map where source pixel ``(h, w)`` moved to ``(h + dy, w + dx)``; uncovered cells are zero."""
    h, w, _ = f.shape
    out = np.zeros_like(f)
    ys, yd = slice(max(0, -dy), min(h, h - dy)), slice(max(0, dy), min(h, h + dy))
    xs, xd = slice(max(0, -dx), min(w, w - dx)), slice(max(0, dx), min(w, w + dx))
    out[yd, xd] = f[ys, xs]
    return out


def interior_mask(h: int, w: int, radius: int) -> np.ndarray:
    """Pixels whose full ``[-R, R]`` lookup windows stay inside the grid."""
    mask = np.zeros((h, w), dtype=bool)
    mask[radius : h - radius, radius : w - radius] = True
    return mask


def translation_volumes(f: np.ndarray, dx: int, dy: int):
    """Oracle-attention volumes for the pair ``(f, f shifted by (dx, dy))``."""
    h, w, _ = f.shape
    f2 = shift_features(f, dx, dy)
    vols = volumes_from_attention(f, f2, oracle_attention(dy, h, w, "vertical"), oracle_attention(dx, h, w, "horizontal"))
    return f2, vols


def translation_recovery(f: np.ndarray, dx: int, dy: int, radius: int) -> tuple[float, float]:
    """Fraction of interior pixels whose slab argmax recovers ``dx`` (horizontal) and ``dy`` (vertical)."""
    if abs(dx) > radius or abs(dy) > radius:
        raise ValueError(f"shift ({dx}, {dy}) exceeds the search radius {radius}")
    h, w, _ = f.shape
    mask = interior_mask(h, w, radius)
    if not mask.any():
        raise ShapeError(f"a {h}x{w} grid has no interior pixels at radius {radius}")
    _, vols = translation_volumes(f, dx, dy)
    hslab, vslab = lookup_both(vols, np.zeros((h, w, 2), dtype=f.dtype), radius)
    got_x = np.argmax(hslab, axis=-1) - radius
    got_y = np.argmax(vslab, axis=-1) - radius
    return float(np.mean(got_x[mask] == dx)), float(np.mean(got_y[mask] == dy))


def allpairs_hit_rate(f1: np.ndarray, f2: np.ndarray, dx: int, dy: int, mask: np.ndarray) -> float:
    """Referee: fraction of masked pixels whose global 4D argmax sits at displacement ``(dx, dy)``."""
    h, w, _ = f1.shape
    vol = allpairs_4d(f1, f2).reshape(h, w, h * w)
    best = np.argmax(vol, axis=-1)
    by, bx = np.divmod(best, w)
    hit = (by - np.arange(h)[:, None] == dy) & (bx - np.arange(w)[None, :] == dx)
    return float(np.mean(hit[mask]))


def search_range_size(h: int, w: int, radius: int) -> int:
    k = 2 * radius + 1
    return k * (h + w) - k * k


def search_region(pixel: tuple[int, int], h: int, w: int, radius: int) -> set[tuple[int, int]]:
    """Target pixels in the row band and column band of ``pixel``."""
    h0, w0 = pixel
    return {(i, j) for i in range(h) for j in range(w) if abs(i - h0) <= radius or abs(j - w0) <= radius}


def probe_position(f1, f2, model: FlowModel, pixel, position, radius: int, base: np.ndarray | None = None) -> bool:
    """True when adding 1 to target pixel ``position`` changes the concatenated slab at ``pixel``."""
    h, w, _ = f1.shape
    zero = np.zeros((h, w, 2), dtype=f1.dtype)
    if base is None:
        base = concatenated_slab(build_volumes(f1, f2, model), zero, radius)[pixel]
    bumped = f2.copy()
    bumped[position] += 1
    slab = concatenated_slab(build_volumes(f1, bumped, model), zero, radius)[pixel]
    return not np.array_equal(slab, base)


def receptive_field_probe(f1, f2, model: FlowModel, pixel, radius: int) -> tuple[set, set]:
    """Perturb every target pixel in turn; returns ``(affected, unaffected)`` position sets."""
    h, w, _ = f1.shape
    zero = np.zeros((h, w, 2), dtype=f1.dtype)
    base = concatenated_slab(build_volumes(f1, f2, model), zero, radius)[pixel]
    affected, unaffected = set(), set()
    for i in range(h):
        for j in range(w):
            hit = probe_position(f1, f2, model, pixel, (i, j), radius, base=base)
            (affected if hit else unaffected).add((i, j))
    return affected, unaffected


def apply_oracle(f2: np.ndarray, shift: int, axis: str) -> np.ndarray:
    h, w, _ = f2.shape
    return aggregate(oracle_attention(shift, h, w, axis), f2, axis)
