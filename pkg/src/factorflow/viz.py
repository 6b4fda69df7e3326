"""Flow colour coding and attention renderings."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

# Middlebury colour wheel: red -> yellow -> green -> cyan -> blue -> magenta
WHEEL_SEGMENTS = (("RY", 15), ("YG", 6), ("GC", 4), ("CB", 11), ("BM", 13), ("MR", 6))


def make_colorwheel() -> np.ndarray:
    """``55 x 3`` float table of RGB hues in [0, 255]."""
    ry, yg, gc, cb, bm, mr = (n for _, n in WHEEL_SEGMENTS)
    wheel = np.zeros((ry + yg + gc + cb + bm + mr, 3))
    col = 0
    wheel[col : col + ry, 0] = 255
    wheel[col : col + ry, 1] = np.floor(255 * np.arange(ry) / ry)
    col += ry
    wheel[col : col + yg, 0] = 255 - np.floor(255 * np.arange(yg) / yg)
    wheel[col : col + yg, 1] = 255
    col += yg
    wheel[col : col + gc, 1] = 255
    wheel[col : col + gc, 2] = np.floor(255 * np.arange(gc) / gc)
    col += gc
    wheel[col : col + cb, 1] = 255 - np.floor(255 * np.arange(cb) / cb)
    wheel[col : col + cb, 2] = 255
    col += cb
    wheel[col : col + bm, 2] = 255
    wheel[col : col + bm, 0] = np.floor(255 * np.arange(bm) / bm)
    col += bm
    wheel[col : col + mr, 2] = 255 - np.floor(255 * np.arange(mr) / mr)
    wheel[col : col + mr, 0] = 255
    return wheel


def flow_to_color(flow: np.ndarray, max_magnitude: float | None = None) -> np.ndarray:
    """``H x W x 3`` uint8 rendering; hue is direction, saturation is magnitude.

    Magnitudes are divided by ``max_magnitude`` (default: the field's maximum).
    Vectors beyond it are darkened.  The hue index wraps with period 55, so +x
    lands on the wheel's first entry from either side of the branch cut.
    """
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ShapeError(f"flow must be H x W x 2, got {flow.shape}")
    if not np.all(np.isfinite(flow)):
        raise ValueError("flow contains non-finite values")
    u, v = flow[..., 0], flow[..., 1]
    rad = np.sqrt(u * u + v * v)
    scale = rad.max() if max_magnitude is None else float(max_magnitude)
    if scale > 0:
        u, v, rad = u / scale, v / scale, rad / scale

    wheel = make_colorwheel()
    n = wheel.shape[0]
    angle = np.arctan2(-v, -u) / np.pi
    fk = np.mod((angle + 1.0) / 2.0 * n, n)
    k0 = np.floor(fk).astype(np.int64) % n
    k1 = (k0 + 1) % n
    f = (fk - np.floor(fk))[..., None]
    col = ((1 - f) * wheel[k0] + f * wheel[k1]) / 255.0

    inside = (rad <= 1)[..., None]
    r = rad[..., None]
    col = np.where(inside, 1 - r * (1 - col), col * 0.75)
    return np.round(255 * col).astype(np.uint8)


def attention_slice_image(attn: np.ndarray, index: int) -> np.ndarray:
    """Grayscale ``N x N`` image of one batch slice (``weights * 255``).

    For vertical attention ``index`` is a column and row ``h`` of the image is
    query ``h``; horizontal attention mirrors this over rows.
    """
    if not 0 <= index < attn.shape[0]:
        raise IndexError(f"slice {index} is outside [0, {attn.shape[0]})")
    return np.round(np.clip(attn[index], 0, 1) * 255).astype(np.uint8)


def attention_line_map(attn: np.ndarray, line: int, axis: str) -> np.ndarray:
    """``H x W`` map of where the pixels of one query line attend.

    Vertical: query row ``line``; ``map[i, w] = attn[w, line, i]``.
    Horizontal: query column ``line``; ``map[h, j] = attn[h, line, j]``.
    """
    if axis == "vertical":
        if not 0 <= line < attn.shape[1]:
            raise IndexError(f"row {line} is outside [0, {attn.shape[1]})")
        return np.ascontiguousarray(attn[:, line, :].T)
    if axis == "horizontal":
        if not 0 <= line < attn.shape[1]:
            raise IndexError(f"column {line} is outside [0, {attn.shape[1]})")
        return np.ascontiguousarray(attn[:, line, :])
    raise ValueError(f"unknown axis {axis!r}")


def overlay(gray: np.ndarray, heat: np.ndarray, alpha: float = 0.6) -> np.ndarray:
    """Blend a [0, 1] heat map (nearest-upsampled to the image) in red over a gray image."""
    gh, gw = gray.shape
    hh, hw = heat.shape
    ys = np.minimum(np.arange(gh) * hh // gh, hh - 1)
    xs = np.minimum(np.arange(gw) * hw // gw, hw - 1)
    big = heat[ys][:, xs]
    peak = big.max()
    if peak > 0:
        big = big / peak
    base = np.repeat(np.clip(gray, 0, 1)[..., None], 3, axis=-1)
    red = np.zeros_like(base)
    red[..., 0] = 1.0
    a = (alpha * big)[..., None]
    return np.round(255 * ((1 - a) * base + a * red)).astype(np.uint8)
