"""Axis-aligned 1D self and cross attention.

Both orientations are evaluated as one batched problem: ``vertical`` attends
within each column (batch = columns, sequence = rows) and ``horizontal``
within each row (batch = rows, sequence = columns).  Attention matrices are
returned in that batched layout, i.e. ``W x H x H`` for vertical and
``H x W x W`` for horizontal, with ``A[b, n, m]`` the weight query ``n``
gives to key ``m``.

Projections use the row-vector convention ``q = x @ wq + bq``.  There is no
value projection: the output mixes the raw value features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import grid
from .errors import ShapeError

AXES = ("vertical", "horizontal")
PE_TEMPERATURE = 10000.0


def _check_axis(axis: str) -> None:
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")


def to_batched(x: np.ndarray, axis: str) -> np.ndarray:
    """View an ``H x W x C`` grid as ``batch x sequence x C`` for ``axis``."""
    _check_axis(axis)
    return grid.permute(x, (1, 0, 2)) if axis == "vertical" else x


def from_batched(x: np.ndarray, axis: str) -> np.ndarray:
    _check_axis(axis)
    return grid.permute(x, (1, 0, 2)) if axis == "vertical" else x


def positional_encoding(h: int, w: int, d: int, temperature: float = PE_TEMPERATURE) -> np.ndarray:
    """Fixed 2D sine encoding, ``h x w x d`` float32.

    Channels ``[0, d/2)`` encode the row, ``[d/2, d)`` the column.  Within a
    half, channel ``2k`` is ``sin(theta / T**(4k/d))`` and ``2k+1`` the
    matching cosine, where ``theta = 2*pi*(p + 0.5)/N`` for coordinate ``p`` of
    an axis with extent ``N``.
    """
    if d % 4:
        raise ShapeError(f"positional encoding needs d divisible by 4, got {d}")
    k = np.arange(d // 4, dtype=np.float64)
    freq = temperature ** (4.0 * k / d)

    def encode(n: int) -> np.ndarray:
        theta = 2.0 * np.pi * (np.arange(n, dtype=np.float64) + 0.5) / n
        arg = theta[:, None] / freq[None, :]
        out = np.empty((n, d // 2))
        out[:, 0::2] = np.sin(arg)
        out[:, 1::2] = np.cos(arg)
        return out

    pe = np.empty((h, w, d))
    pe[:, :, : d // 2] = encode(h)[:, None, :]
    pe[:, :, d // 2 :] = encode(w)[None, :, :]
    return pe.astype(grid.DTYPE)


@dataclass
class AttentionWeights:
    wq: np.ndarray
    wk: np.ndarray
    bq: np.ndarray
    bk: np.ndarray

    def __post_init__(self):
        d = self.wq.shape[0]
        for name in ("wq", "wk"):
            if getattr(self, name).shape != (d, d):
                raise ShapeError(f"{name} must be {d}x{d}, got {getattr(self, name).shape}")
        for name in ("bq", "bk"):
            if getattr(self, name).shape != (d,):
                raise ShapeError(f"{name} must have length {d}, got {getattr(self, name).shape}")

    @property
    def dim(self) -> int:
        return self.wq.shape[0]

    @classmethod
    def random(cls, d: int, rng: np.random.Generator, dtype=grid.DTYPE) -> "AttentionWeights":
        std = 1.0 / math.sqrt(d)
        return cls(
            wq=(rng.standard_normal((d, d)) * std).astype(dtype),
            wk=(rng.standard_normal((d, d)) * std).astype(dtype),
            bq=np.zeros(d, dtype=dtype),
            bk=np.zeros(d, dtype=dtype),
        )

    @classmethod
    def zeros(cls, d: int, dtype=grid.DTYPE) -> "AttentionWeights":
        return cls(*(np.zeros(s, dtype=dtype) for s in ((d, d), (d, d), (d,), (d,))))

    def astype(self, dtype) -> "AttentionWeights":
        return AttentionWeights(*(np.asarray(t, dtype=dtype) for t in (self.wq, self.wk, self.bq, self.bk)))

    def to_tensors(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.{n}": getattr(self, n) for n in ("wq", "wk", "bq", "bk")}

    @classmethod
    def from_tensors(cls, prefix: str, tensors: dict) -> "AttentionWeights":
        try:
            return cls(*(np.asarray(tensors[f"{prefix}.{n}"]) for n in ("wq", "wk", "bq", "bk")))
        except KeyError as exc:
            raise ShapeError(f"weights are missing tensor {exc.args[0]!r}") from None


def _check_inputs(wts: AttentionWeights, pe: np.ndarray, *maps: np.ndarray) -> None:
    shape = np.shape(pe)
    if len(shape) != 3:
        raise ShapeError(f"positional encoding must be H x W x D, got {shape}")
    for m in maps:
        if np.shape(m) != shape:
            raise ShapeError(f"feature shape {np.shape(m)} does not match positional encoding {shape}")
    if wts.dim != shape[2]:
        raise ShapeError(f"weights are {wts.dim}-dimensional, features have D={shape[2]}")


def _logits(src, tgt, axis, wts, pe):
    d = pe.shape[2]
    q = grid.linear(src + pe, wts.wq, wts.bq)
    k = grid.linear(tgt + pe, wts.wk, wts.bk)
    qb = to_batched(q, axis)
    kb = to_batched(k, axis)
    s = grid.matmul_last2(qb, grid.permute(kb, (0, 2, 1)))
    s *= 1.0 / math.sqrt(d)
    return s, q, k


def aggregate(attn: np.ndarray, values: np.ndarray, axis: str) -> np.ndarray:
    """Mix ``values`` along ``axis`` with batched weights ``attn``; returns ``H x W x D``."""
    vb = to_batched(values, axis)
    if attn.shape != vb.shape[:2] + (vb.shape[1],):
        raise ShapeError(f"attention {attn.shape} does not fit values {values.shape} on the {axis} axis")
    out = grid.matmul_last2(attn, vb)
    return np.ascontiguousarray(from_batched(out, axis))


def attention_matrix(src, tgt, axis: str, wts: AttentionWeights, pe) -> np.ndarray:
    _check_axis(axis)
    _check_inputs(wts, pe, src, tgt)
    s, _, _ = _logits(src, tgt, axis, wts, pe)
    return grid.softmax_last(s)


def self_attention_1d(f: np.ndarray, axis: str, wts: AttentionWeights, pe: np.ndarray) -> np.ndarray:
    attn = attention_matrix(f, f, axis, wts, pe)
    return aggregate(attn, f, axis)


def cross_attention_1d(f1a: np.ndarray, f2: np.ndarray, axis: str, wts: AttentionWeights, pe: np.ndarray):
    """Aggregate target features ``f2`` along ``axis`` conditioned on the source ``f1a``.

    Returns ``(f2_hat, attn)``; for the vertical axis
    ``f2_hat[h, w] = sum_i attn[w, h, i] * f2[i, w]``.
    """
    attn = attention_matrix(f1a, f2, axis, wts, pe)
    return aggregate(attn, f2, axis), attn


def attend_vjp(f1a, f2, axis: str, wts: AttentionWeights, pe, grad_out) -> dict[str, np.ndarray]:
    """Vector-Jacobian product of ``cross_attention_1d``'s feature output.

    Returns gradients keyed ``f1a, f2, wq, wk, bq, bk``.  Work happens in the
    promoted dtype of the inputs, so float64 operands give a float64 VJP.
    """
    _check_axis(axis)
    _check_inputs(wts, pe, f1a, f2, grad_out)
    d = pe.shape[2]
    scale = 1.0 / math.sqrt(d)

    s, q, k = _logits(f1a, f2, axis, wts, pe)
    attn = grid.softmax_last(s)
    qb, kb = to_batched(q, axis), to_batched(k, axis)
    vb, gb = to_batched(f2, axis), to_batched(grad_out, axis)

    d_attn = grid.matmul_last2(gb, grid.permute(vb, (0, 2, 1)))
    d_vb = grid.matmul_last2(grid.permute(attn, (0, 2, 1)), gb)
    d_s = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True))
    d_qb = grid.matmul_last2(d_s, kb) * scale
    d_kb = grid.matmul_last2(grid.permute(d_s, (0, 2, 1)), qb) * scale
    d_q = from_batched(d_qb, axis)
    d_k = from_batched(d_kb, axis)

    x1 = (f1a + pe).reshape(-1, d)
    x2 = (f2 + pe).reshape(-1, d)
    dq_flat = np.ascontiguousarray(d_q).reshape(-1, d)
    dk_flat = np.ascontiguousarray(d_k).reshape(-1, d)
    return {
        "f1a": grid.linear(d_q, wts.wq.T),
        "f2": np.ascontiguousarray(from_batched(d_vb, axis)) + grid.linear(d_k, wts.wk.T),
        "wq": grid.linear(x1.T, dq_flat),
        "wk": grid.linear(x2.T, dk_flat),
        "bq": dq_flat.sum(axis=0),
        "bk": dk_flat.sum(axis=0),
    }
