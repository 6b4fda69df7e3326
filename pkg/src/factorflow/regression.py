"""Iterative flow regression over lookup slabs, plus a non-learned soft-argmax.

Update block per iteration::

    slab   = [lookup(horizontal volume, fx) | lookup(vertical volume, fy)]
    motion = relu(relu([slab | flow] @ l1 + b1) @ l2 + b2)
    hidden = ConvGRU(hidden, [context | motion])      # 3x3 kernels, zero padded
    flow  += relu(hidden @ h1 + c1) @ h2 + c2

Hidden state and context come from one per-pixel layer on the source
features: ``tanh`` of the first ``hidden_dim`` outputs and ``relu`` of the rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import grid
from .costvolume import CostVolume, concat_lookups, lookup
from .errors import ShapeError

DEFAULT_HIDDEN = 96
DEFAULT_CONTEXT = 64
DEFAULT_MOTION = 64
DEFAULT_HEAD = 128

# F1DW tensor name -> (weight field, bias field); biases are stored as "<name>.bias"
TENSOR_NAMES = {
    "ctx.l1": ("ctx_w", "ctx_b"),
    "motion.l1": ("motion_w1", "motion_b1"),
    "motion.l2": ("motion_w2", "motion_b2"),
    "gru.kz": ("kz", "kz_b"),
    "gru.kr": ("kr", "kr_b"),
    "gru.kh": ("kh", "kh_b"),
    "head.l1": ("head_w1", "head_b1"),
    "head.l2": ("head_w2", "head_b2"),
}


def sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def relu(x):
    return np.maximum(x, 0)


@dataclass
class UpdateWeights:
    ctx_w: np.ndarray
    ctx_b: np.ndarray
    motion_w1: np.ndarray
    motion_b1: np.ndarray
    motion_w2: np.ndarray
    motion_b2: np.ndarray
    kz: np.ndarray
    kz_b: np.ndarray
    kr: np.ndarray
    kr_b: np.ndarray
    kh: np.ndarray
    kh_b: np.ndarray
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray
    head_b2: np.ndarray

    @property
    def hidden_dim(self) -> int:
        return self.kz.shape[3]

    @property
    def context_dim(self) -> int:
        return self.ctx_w.shape[1] - self.hidden_dim

    @property
    def motion_dim(self) -> int:
        return self.motion_w2.shape[1]

    @property
    def radius(self) -> int:
        return (self.motion_w1.shape[0] - 2) // 4

    @staticmethod
    def shapes(feat_dim, radius, hidden=DEFAULT_HIDDEN, context=DEFAULT_CONTEXT,
               motion=DEFAULT_MOTION, head=DEFAULT_HEAD) -> dict[str, tuple]:
        slab = 2 * (2 * radius + 1)
        gru_in = hidden + context + motion
        return {
            "ctx_w": (feat_dim, hidden + context), "ctx_b": (hidden + context,),
            "motion_w1": (slab + 2, motion), "motion_b1": (motion,),
            "motion_w2": (motion, motion), "motion_b2": (motion,),
            "kz": (3, 3, gru_in, hidden), "kz_b": (hidden,),
            "kr": (3, 3, gru_in, hidden), "kr_b": (hidden,),
            "kh": (3, 3, gru_in, hidden), "kh_b": (hidden,),
            "head_w1": (hidden, head), "head_b1": (head,),
            "head_w2": (head, 2), "head_b2": (2,),
        }

    @classmethod
    def random(cls, feat_dim, radius, rng: np.random.Generator, dtype=grid.DTYPE, **widths) -> "UpdateWeights":
        """Gaussian weights with std ``1/sqrt(fan_in)``, zero biases."""
        out = {}
        for name, shape in cls.shapes(feat_dim, radius, **widths).items():
            if len(shape) == 1:
                out[name] = np.zeros(shape, dtype=dtype)
            else:
                fan_in = int(np.prod(shape[:-1]))
                out[name] = (rng.standard_normal(shape) / math.sqrt(fan_in)).astype(dtype)
        return cls(**out)

    @classmethod
    def zeros(cls, feat_dim, radius, dtype=grid.DTYPE, **widths) -> "UpdateWeights":
        return cls(**{n: np.zeros(s, dtype=dtype) for n, s in cls.shapes(feat_dim, radius, **widths).items()})

    def to_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for tname, (wf, bf) in TENSOR_NAMES.items():
            out[tname] = getattr(self, wf)
            out[tname + ".bias"] = getattr(self, bf)
        return out

    @classmethod
    def from_tensors(cls, tensors: dict) -> "UpdateWeights":
        kw = {}
        for tname, (wf, bf) in TENSOR_NAMES.items():
            for key, field in ((tname, wf), (tname + ".bias", bf)):
                if key not in tensors:
                    raise ShapeError(f"weights are missing tensor {key!r}")
                kw[field] = np.asarray(tensors[key])
        return cls(**kw)

    def astype(self, dtype) -> "UpdateWeights":
        return UpdateWeights(**{f.name: np.asarray(getattr(self, f.name), dtype=dtype) for f in fields(self)})


@dataclass
class UpdateState:
    hidden: np.ndarray
    context: np.ndarray


def init_state(f1: np.ndarray, weights: UpdateWeights) -> UpdateState:
    x = grid.linear(f1, weights.ctx_w, weights.ctx_b)
    dh = weights.hidden_dim
    return UpdateState(hidden=np.tanh(x[..., :dh]), context=relu(x[..., dh:]))


def conv3x3(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Zero-padded 3x3 cross-correlation; ``kernel[a, b]`` reads ``x[y + a - 1, x + b - 1]``."""
    h, w, c = x.shape
    if kernel.shape[:3] != (3, 3, c):
        raise ShapeError(f"kernel {kernel.shape} does not accept {c} input channels")
    p = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    cols = np.concatenate([p[a : a + h, b : b + w] for a in range(3) for b in range(3)], axis=-1)
    return grid.linear(cols, kernel.reshape(9 * c, kernel.shape[3]), bias)


def motion_encode(slab: np.ndarray, flow: np.ndarray, weights: UpdateWeights) -> np.ndarray:
    x = np.concatenate([slab, flow.astype(slab.dtype, copy=False)], axis=-1)
    if x.shape[-1] != weights.motion_w1.shape[0]:
        raise ShapeError(f"motion encoder expects {weights.motion_w1.shape[0] - 2} slab channels, got {slab.shape[-1]}")
    x = relu(grid.linear(x, weights.motion_w1, weights.motion_b1))
    return relu(grid.linear(x, weights.motion_w2, weights.motion_b2))


def gru_update(state: UpdateState, motion: np.ndarray, weights: UpdateWeights) -> UpdateState:
    h = state.hidden
    x = np.concatenate([state.context, motion], axis=-1)
    hx = np.concatenate([h, x], axis=-1)
    z = sigmoid(conv3x3(hx, weights.kz, weights.kz_b))
    r = sigmoid(conv3x3(hx, weights.kr, weights.kr_b))
    q = np.tanh(conv3x3(np.concatenate([r * h, x], axis=-1), weights.kh, weights.kh_b))
    return UpdateState(hidden=(1 - z) * h + z * q, context=state.context)


def flow_head(hidden: np.ndarray, weights: UpdateWeights) -> np.ndarray:
    x = relu(grid.linear(hidden, weights.head_w1, weights.head_b1))
    return grid.linear(x, weights.head_w2, weights.head_b2)


def iterate(f1: np.ndarray, volumes: tuple[CostVolume, CostVolume], weights: UpdateWeights,
            n_iters: int, radius: int, return_hidden: bool = False):
    """Run ``n_iters`` shared updates from zero flow; returns every intermediate flow.

    ``volumes`` is ``(horizontal, vertical)``.  With ``return_hidden`` the
    hidden state after each iteration is returned as a second list.
    """
    if n_iters < 1:
        raise ValueError(f"need at least one iteration, got {n_iters}")
    if weights.radius != radius:
        raise ShapeError(f"update weights were built for radius {weights.radius}, not {radius}")
    cv_h, cv_v = volumes
    state = init_state(f1, weights)
    flow = np.zeros(f1.shape[:2] + (2,), dtype=f1.dtype)
    flows, hiddens = [], []
    for _ in range(n_iters):
        slab = concat_lookups(lookup(cv_h, flow, radius), lookup(cv_v, flow, radius))
        motion = motion_encode(slab, flow, weights)
        state = gru_update(state, motion, weights)
        flow = flow + flow_head(state.hidden, weights)
        flows.append(flow)
        hiddens.append(state.hidden)
    return (flows, hiddens) if return_hidden else flows


def softargmax_flow(hslab: np.ndarray, vslab: np.ndarray, temperature: float) -> np.ndarray:
    """Expected displacement under ``softmax(slab / temperature)`` per direction."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if hslab.shape != vslab.shape:
        raise ShapeError(f"slab shapes differ: {hslab.shape} vs {vslab.shape}")
    radius = (hslab.shape[-1] - 1) // 2
    r = np.arange(-radius, radius + 1, dtype=np.float64)
    fx = grid.softmax_last(hslab.astype(np.float64) / temperature) @ r
    fy = grid.softmax_last(vslab.astype(np.float64) / temperature) @ r
    return np.stack([fx, fy], axis=-1).astype(hslab.dtype)


def upsample_flow(flow: np.ndarray, factor: int = 8) -> np.ndarray:
    """Bilinear (corner-aligned) spatial upsampling; displacements scale by ``factor``."""
    if factor < 1:
        raise ValueError(f"upsampling factor must be >= 1, got {factor}")
    h, w, _ = flow.shape

    def coords(n):
        m = n * factor
        if n == 1 or m == 1:
            return np.zeros(m, dtype=np.int64), np.zeros(m, dtype=np.int64), np.zeros(m)
        src = np.arange(m) * (n - 1) / (m - 1)
        i0 = np.minimum(np.floor(src).astype(np.int64), n - 2)
        return i0, i0 + 1, src - i0

    y0, y1, ty = coords(h)
    x0, x1, tx = coords(w)
    f = flow.astype(np.float64)
    rows = f[y0] * (1 - ty)[:, None, None] + f[np.minimum(y1, h - 1)] * ty[:, None, None]
    out = rows[:, x0] * (1 - tx)[None, :, None] + rows[:, np.minimum(x1, w - 1)] * tx[None, :, None]
    return (out * factor).astype(flow.dtype)


def downsample_flow(flow: np.ndarray, factor: int = 8) -> np.ndarray:
    """Block-average by ``factor``; displacements divide by ``factor``."""
    h, w, c = flow.shape
    if h % factor or w % factor:
        raise ShapeError(f"{h}x{w} flow is not divisible by {factor}")
    blocks = flow.astype(np.float64).reshape(h // factor, factor, w // factor, factor, c)
    return (blocks.mean(axis=(1, 3)) / factor).astype(flow.dtype)
