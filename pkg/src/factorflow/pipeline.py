"""End-to-end wiring: features -> attention -> two 3D volumes -> flow.

Horizontal volume: horizontal self attention on the source, vertical cross
attention onto the target, horizontal correlation.  Vertical volume: the
same with both axes exchanged.  Correlation always uses the raw source
features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import weightfile
from .attention import (
    AttentionWeights,
    aggregate,
    cross_attention_1d,
    positional_encoding,
    self_attention_1d,
)
from .costvolume import CostVolume, concat_lookups, correlate_full, lookup
from .errors import ShapeError
from .regression import UpdateWeights, iterate, softargmax_flow

ATTENTION_SETS = ("self_h", "self_v", "cross_v", "cross_h")
SOLVERS = ("gru", "softargmax")


@dataclass
class FlowModel:
    self_h: AttentionWeights
    self_v: AttentionWeights
    cross_v: AttentionWeights
    cross_h: AttentionWeights
    update: UpdateWeights | None = None

    @property
    def dim(self) -> int:
        return self.cross_v.dim

    @classmethod
    def from_seed(cls, d: int, radius: int | None = None, seed: int = 0, **widths) -> "FlowModel":
        """Seeded Gaussian initialisation; the update block is built when ``radius`` is given."""
        rng = np.random.default_rng(seed)
        attn = {name: AttentionWeights.random(d, rng) for name in ATTENTION_SETS}
        update = UpdateWeights.random(d, radius, rng, **widths) if radius is not None else None
        return cls(**attn, update=update)

    @classmethod
    def zeros(cls, d: int, radius: int | None = None, **widths) -> "FlowModel":
        attn = {name: AttentionWeights.zeros(d) for name in ATTENTION_SETS}
        update = UpdateWeights.zeros(d, radius, **widths) if radius is not None else None
        return cls(**attn, update=update)

    def astype(self, dtype) -> "FlowModel":
        attn = {name: getattr(self, name).astype(dtype) for name in ATTENTION_SETS}
        return FlowModel(**attn, update=None if self.update is None else self.update.astype(dtype))

    def to_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name in ATTENTION_SETS:
            out.update(getattr(self, name).to_tensors(name))
        if self.update is not None:
            out.update(self.update.to_tensors())
        return out

    @classmethod
    def from_tensors(cls, tensors: dict) -> "FlowModel":
        attn = {name: AttentionWeights.from_tensors(name, tensors) for name in ATTENTION_SETS}
        update = UpdateWeights.from_tensors(tensors) if "ctx.l1" in tensors else None
        return cls(**attn, update=update)

    @classmethod
    def load(cls, path) -> "FlowModel":
        return cls.from_tensors(weightfile.read_weights(path))

    def save(self, path) -> None:
        weightfile.write_weights(self.to_tensors(), path)


@dataclass
class Volumes:
    horizontal: CostVolume
    vertical: CostVolume
    attn_v: np.ndarray
    attn_h: np.ndarray

    @property
    def pair(self) -> tuple[CostVolume, CostVolume]:
        return self.horizontal, self.vertical

    @property
    def nbytes(self) -> int:
        return self.horizontal.nbytes + self.vertical.nbytes


def attend_targets(f1: np.ndarray, f2: np.ndarray, model: FlowModel, pe: np.ndarray | None = None):
    """Returns ``(f2_hat_v, attn_v, f2_hat_h, attn_h)``."""
    if f1.shape != f2.shape:
        raise ShapeError(f"source {f1.shape} and target {f2.shape} differ")
    h, w, d = f1.shape
    if pe is None:
        pe = positional_encoding(h, w, d)
    src_h = self_attention_1d(f1, "horizontal", model.self_h, pe)
    f2_v, attn_v = cross_attention_1d(src_h, f2, "vertical", model.cross_v, pe)
    src_v = self_attention_1d(f1, "vertical", model.self_v, pe)
    f2_h, attn_h = cross_attention_1d(src_v, f2, "horizontal", model.cross_h, pe)
    return f2_v, attn_v, f2_h, attn_h


def volumes_from_attention(f1, f2, attn_v, attn_h) -> Volumes:
    """Build both volumes from given vertical (``W x H x H``) and horizontal (``H x W x W``) attention."""
    f2_v = aggregate(attn_v, f2, "vertical")
    f2_h = aggregate(attn_h, f2, "horizontal")
    return Volumes(correlate_full(f1, f2_v, "horizontal"), correlate_full(f1, f2_h, "vertical"), attn_v, attn_h)


def build_volumes(f1, f2, model: FlowModel, pe=None) -> Volumes:
    f2_v, attn_v, f2_h, attn_h = attend_targets(f1, f2, model, pe)
    return Volumes(correlate_full(f1, f2_v, "horizontal"), correlate_full(f1, f2_h, "vertical"), attn_v, attn_h)


def lookup_both(volumes: Volumes, flow: np.ndarray, radius: int) -> tuple[np.ndarray, np.ndarray]:
    return lookup(volumes.horizontal, flow, radius), lookup(volumes.vertical, flow, radius)


def concatenated_slab(volumes: Volumes, flow: np.ndarray, radius: int) -> np.ndarray:
    return concat_lookups(*lookup_both(volumes, flow, radius))


def solve(f1, volumes: Volumes, radius: int, solver: str = "gru", model: FlowModel | None = None,
          iters: int = 12, temperature: float = 0.01) -> list[np.ndarray]:
    """Flow estimates at feature scale; a one-element list for the soft-argmax solver."""
    if solver == "softargmax":
        zero = np.zeros(f1.shape[:2] + (2,), dtype=f1.dtype)
        return [softargmax_flow(*lookup_both(volumes, zero, radius), temperature)]
    if solver != "gru":
        raise ValueError(f"solver must be one of {SOLVERS}, got {solver!r}")
    if model is None or model.update is None:
        raise ShapeError("the gru solver needs update-block weights")
    return iterate(f1, volumes.pair, model.update, iters, radius)
