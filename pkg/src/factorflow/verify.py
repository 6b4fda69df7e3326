"""Verification suites driven by the oracles.

Each suite returns a list of :class:`Check` records; the CLI prints them and
the test suite asserts on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracle
from .attention import AttentionWeights, attend_vjp, cross_attention_1d, positional_encoding
from .costvolume import correlate_full, correlate_vjp
from .errors import CapExceededError
from .features import random_unit_features
from .pipeline import FlowModel, build_volumes, concatenated_slab, solve


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float
    ok: bool

    def line(self) -> str:
        return f"check={self.name} status={'PASS' if self.ok else 'FAIL'} value={self.value:.6g} tol={self.tol:.6g}"


def _upper(name, value, tol):
    return Check(name, float(value), tol, bool(value <= tol))


def _lower(name, value, tol):
    return Check(name, float(value), tol, bool(value >= tol))


def _cap(h, w, what):
    if h * w > oracle.MAX_CELLS:
        raise CapExceededError(f"{h}x{w} exceeds the {what} cap of {oracle.MAX_CELLS} cells")


def scaled_error(got, want, floor=1e-300) -> float:
    """Max abs deviation divided by the reference's largest magnitude (at least ``floor``)."""
    want = np.asarray(want, dtype=np.float64)
    return float(np.max(np.abs(np.asarray(got, dtype=np.float64) - want)) / max(np.max(np.abs(want)), floor))


def relative_error(got, want, floor=1e-12) -> float:
    """Max elementwise ``|got - want| / max(|want|, floor)``."""
    want = np.asarray(want, dtype=np.float64)
    return float(np.max(np.abs(np.asarray(got, dtype=np.float64) - want) / np.maximum(np.abs(want), floor)))


def equivalence_pe(h: int, w: int, d: int) -> np.ndarray:
    """Sine encoding when ``d`` allows one, zeros otherwise (the identity holds for any attention)."""
    if d % 4:
        return np.zeros((h, w, d), dtype=np.float32)
    return positional_encoding(h, w, d)


def equivalence_errors(f1, f2, model: FlowModel) -> dict[str, float]:
    """Pipeline volumes vs the expanded attention-weighted sums."""
    pe = equivalence_pe(*f1.shape).astype(f1.dtype)
    vols = build_volumes(f1, f2, model, pe)
    out = {}
    for direction, attn, cv in (("horizontal", vols.attn_v, vols.horizontal), ("vertical", vols.attn_h, vols.vertical)):
        ref = oracle.expand_factorized_volume(attn, f1, f2, direction)
        metric = relative_error if cv.values.dtype == np.float64 else scaled_error
        out[direction] = metric(cv.values, ref)
    return out


def suite_equivalence(h=5, w=6, d=4, seed=0) -> list[Check]:
    _cap(h, w, "oracle")
    rng = np.random.default_rng(seed)
    f1 = random_unit_features(h, w, d, rng)
    f2 = random_unit_features(h, w, d, rng)
    errs = equivalence_errors(f1, f2, FlowModel.from_seed(d, seed=seed))
    return [_upper(f"equivalence.{k}", v, 1e-5) for k, v in errs.items()]


def receptive_fields(f1, f2, model: FlowModel, radius: int) -> dict[tuple, set]:
    """For every interior pixel, the target pixels whose +1 perturbation changes its slab."""
    h, w, _ = f1.shape
    zero = np.zeros((h, w, 2), dtype=f1.dtype)
    base = concatenated_slab(build_volumes(f1, f2, model), zero, radius)
    mask = oracle.interior_mask(h, w, radius)
    pixels = [tuple(p) for p in np.argwhere(mask)]
    affected = {p: set() for p in pixels}
    for pos in np.ndindex(h, w):
        bumped = f2.copy()
        bumped[pos] += 1
        slab = concatenated_slab(build_volumes(f1, bumped, model), zero, radius)
        for p in pixels:
            if not np.array_equal(slab[p], base[p]):
                affected[p].add(pos)
    return affected


def suite_receptive_field(h=6, w=8, d=8, r=1, seed=0) -> list[Check]:
    _cap(h, w, "probe")
    rng = np.random.default_rng(seed)
    f1 = random_unit_features(h, w, d, rng)
    f2 = random_unit_features(h, w, d, rng)
    affected = receptive_fields(f1, f2, FlowModel.from_seed(d, seed=seed), r)
    expect = oracle.search_range_size(h, w, r)
    if not affected:
        return [Check("receptive_field.interior_pixels", 0, 1, False)]
    false_pos = sum(len(s - oracle.search_region(p, h, w, r)) for p, s in affected.items())
    false_neg = sum(len(oracle.search_region(p, h, w, r) - s) for p, s in affected.items())
    sizes = [len(s) for s in affected.values()]
    return [
        Check("receptive_field.affected_count", min(sizes), expect, set(sizes) == {expect}),
        _upper("receptive_field.false_positives", false_pos, 0),
        _upper("receptive_field.false_negatives", false_neg, 0),
    ]


def central_difference(fn, x, upstream, step=1e-3) -> np.ndarray:
    """``d/dx sum(upstream * fn(x))`` by central differences in float64."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        keep = x[idx]
        x[idx] = keep + step
        hi = float(np.sum(upstream * fn(x)))
        x[idx] = keep - step
        lo = float(np.sum(upstream * fn(x)))
        x[idx] = keep
        g[idx] = (hi - lo) / (2 * step)
    return g


GRAD_FLOOR = 1e-3


def gradcheck_errors(h=3, w=4, d=4, seed=0, step=1e-3) -> dict[str, float]:
    """Scaled max error of each analytic VJP against central differences.

    Errors are relative to the largest numeric gradient entry, floored at
    ``GRAD_FLOOR``: the key-bias gradient is identically zero (a key bias
    shifts a whole softmax row) and is therefore judged absolutely.
    """
    rng = np.random.default_rng(seed)
    pe = positional_encoding(h, w, d).astype(np.float64)
    f1 = rng.standard_normal((h, w, d))
    f2 = rng.standard_normal((h, w, d))
    wts = AttentionWeights(
        rng.standard_normal((d, d)) / math.sqrt(d),
        rng.standard_normal((d, d)) / math.sqrt(d),
        0.1 * rng.standard_normal(d),
        0.1 * rng.standard_normal(d),
    )
    errs = {}
    for axis in ("vertical", "horizontal"):
        up = rng.standard_normal((h, w, d))
        grads = attend_vjp(f1, f2, axis, wts, pe, up)
        base = {"f1a": f1, "f2": f2, "wq": wts.wq, "wk": wts.wk, "bq": wts.bq, "bk": wts.bk}

        def forward(name, x, axis=axis):
            args = dict(base, **{name: x})
            w_ = AttentionWeights(args["wq"], args["wk"], args["bq"], args["bk"])
            return cross_attention_1d(args["f1a"], args["f2"], axis, w_, pe)[0]

        for name in base:
            num = central_difference(lambda x, n=name: forward(n, x), base[name], up, step)
            errs[f"attention.{axis}.{name}"] = scaled_error(grads[name], num, GRAD_FLOOR)
    for direction in ("horizontal", "vertical"):
        up = rng.standard_normal((h, w, w) if direction == "horizontal" else (h, w, h))
        g1, g2 = correlate_vjp(f1, f2, direction, up)
        n1 = central_difference(lambda x: correlate_full(x, f2, direction).values, f1, up, step)
        n2 = central_difference(lambda x: correlate_full(f1, x, direction).values, f2, up, step)
        errs[f"correlation.{direction}.f1"] = scaled_error(g1, n1, GRAD_FLOOR)
        errs[f"correlation.{direction}.f2"] = scaled_error(g2, n2, GRAD_FLOOR)
    return errs


def suite_gradcheck(h=3, w=4, d=4, seed=0) -> list[Check]:
    _cap(h, w, "gradcheck")
    errs = gradcheck_errors(h, w, d, seed)
    checks = [_upper(f"gradcheck.{k}", v, 1e-4) for k, v in errs.items()]
    checks.append(_upper("gradcheck.max_rel_err", max(errs.values()), 1e-4))
    return checks


def translation_metrics(f, dx, dy, radius, temperature=0.01) -> dict[str, float]:
    h, w, _ = f.shape
    hit_x, hit_y = oracle.translation_recovery(f, dx, dy, radius)
    f2, vols = oracle.translation_volumes(f, dx, dy)
    mask = oracle.interior_mask(h, w, radius)
    ref = oracle.allpairs_hit_rate(f, f2, dx, dy, mask)
    flow = solve(f, vols, radius, "softargmax", temperature=temperature)[0].astype(np.float64)
    err = np.sqrt(((flow[mask] - np.array([dx, dy])) ** 2).sum(axis=-1))
    return {"hit_x": hit_x, "hit_y": hit_y, "referee": ref, "softargmax_err": float(err.mean())}


def suite_translation(h=24, w=32, d=16, r=8, seed=0, shift=(5, -3), temperature=0.01) -> list[Check]:
    _cap(h, w, "4D referee")
    rng = np.random.default_rng(seed)
    m = translation_metrics(random_unit_features(h, w, d, rng), *shift, r, temperature)
    gap = max(abs(m["hit_x"] - m["referee"]), abs(m["hit_y"] - m["referee"]))
    return [
        _lower("translation.hit_rate_x", m["hit_x"], 0.99),
        _lower("translation.hit_rate_y", m["hit_y"], 0.99),
        _upper("translation.referee_gap", gap, 0.01),
        _upper("translation.softargmax_mean_err", m["softargmax_err"], 0.5),
    ]


SUITES = {
    "equivalence": suite_equivalence,
    "receptive-field": suite_receptive_field,
    "gradcheck": suite_gradcheck,
    "translation": suite_translation,
}
