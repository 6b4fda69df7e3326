"""Analytic and measured memory of all-pairs vs factorized cost volumes.

Counts are in float32 elements at feature resolution:

* all-pairs 4D volume: ``(H*W)**2``
* two factorized 3D volumes: ``H*W*W + H*W*H = H*W*(H + W)``

Measured mode allocates the source feature and both attended target features
(``3*H*W*D`` floats, the fixed feature overhead) and then builds the two
volumes under ``tracemalloc``; the all-pairs side is only ever analytic.
"""

from __future__ import annotations

import csv
import io
import math
import time
import tracemalloc
from dataclasses import asdict, dataclass, fields

import numpy as np

from .costvolume import correlate_full

BYTES_PER_ELEM = 4
DEFAULT_MEASURE_CAP = 256 * 2**20

# end-to-end GPU memory at 1088x1920 input, 12 iterations (reference only)
REFERENCE_END_TO_END_GB = {"allpairs": 8.33, "factorized": 1.42}


@dataclass
class BenchRecord:
    h: int
    w: int
    allpairs_elems: int
    factorized_elems: int
    allpairs_bytes: int
    factorized_bytes: int
    feature_bytes: int
    measured_peak_bytes: int | None = None
    build_time_ms: float | None = None
    status: str = "analytic"

    @property
    def element_ratio(self) -> float:
        return self.allpairs_elems / self.factorized_elems


CSV_COLUMNS = [f.name for f in fields(BenchRecord)]


def analytic_record(h: int, w: int, d: int = 64) -> BenchRecord:
    n = h * w
    allpairs = n * n
    factorized = n * (h + w)
    return BenchRecord(
        h=h,
        w=w,
        allpairs_elems=allpairs,
        factorized_elems=factorized,
        allpairs_bytes=allpairs * BYTES_PER_ELEM,
        factorized_bytes=factorized * BYTES_PER_ELEM,
        feature_bytes=3 * n * d * BYTES_PER_ELEM,
    )


def measure_factorized(h: int, w: int, d: int = 64, seed: int = 0) -> tuple[int, float]:
    """Peak traced bytes and wall time (ms) of building both volumes from fresh features."""
    rng = np.random.default_rng(seed)
    was_tracing = tracemalloc.is_tracing()
    if not was_tracing:
        tracemalloc.start()
    tracemalloc.reset_peak()
    start, _ = tracemalloc.get_traced_memory()
    try:
        f1 = rng.standard_normal((h, w, d), dtype=np.float32)
        f2_v = rng.standard_normal((h, w, d), dtype=np.float32)
        f2_h = rng.standard_normal((h, w, d), dtype=np.float32)
        t0 = time.perf_counter()
        cv_h = correlate_full(f1, f2_v, "horizontal")
        cv_v = correlate_full(f1, f2_h, "vertical")
        elapsed = (time.perf_counter() - t0) * 1e3
        _, peak = tracemalloc.get_traced_memory()
        del cv_h, cv_v, f1, f2_v, f2_h
    finally:
        if not was_tracing:
            tracemalloc.stop()
    return peak - start, elapsed


def sweep_points(start: tuple[int, int], stop: tuple[int, int], steps: int) -> list[tuple[int, int]]:
    """Geometric sweep between two extents; aspect-preserving when ``start`` and ``stop`` share it."""
    if steps < 2:
        return [start]
    pts = []
    for t in np.linspace(0.0, 1.0, steps):
        h = round(start[0] * (stop[0] / start[0]) ** t)
        w = round(start[1] * (stop[1] / start[1]) ** t)
        if not pts or pts[-1] != (h, w):
            pts.append((h, w))
    return pts


def run_sweep(points, d: int = 64, mode: str = "analytic", measure_cap: int = DEFAULT_MEASURE_CAP,
              seed: int = 0) -> list[BenchRecord]:
    if mode not in ("analytic", "measured"):
        raise ValueError(f"mode must be 'analytic' or 'measured', got {mode!r}")
    records = []
    for h, w in points:
        rec = analytic_record(h, w, d)
        if mode == "measured":
            if rec.factorized_bytes + rec.feature_bytes > measure_cap:
                rec.status = "skipped"
            else:
                try:
                    rec.measured_peak_bytes, rec.build_time_ms = measure_factorized(h, w, d, seed)
                    rec.status = "ok"
                except MemoryError:
                    rec.status = "oom"
        records.append(rec)
    return records


def loglog_slope(pixels, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(pixels)``."""
    x = np.log(np.asarray(pixels, dtype=np.float64))
    y = np.log(np.asarray(values, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])


def scaling_slopes(records) -> tuple[float, float]:
    px = [r.h * r.w for r in records]
    return (
        loglog_slope(px, [r.allpairs_bytes for r in records]),
        loglog_slope(px, [r.factorized_bytes for r in records]),
    )


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in records:
        row = asdict(r)
        row = {k: ("" if v is None else (f"{v:.3f}" if isinstance(v, float) else v)) for k, v in row.items()}
        writer.writerow(row)
    return buf.getvalue()


def measured_within(rec: BenchRecord, tol: float = 0.10) -> bool:
    """Measured peak within ``tol`` of volumes plus feature overhead."""
    if rec.measured_peak_bytes is None:
        return False
    expect = rec.factorized_bytes + rec.feature_bytes
    return math.isclose(rec.measured_peak_bytes, expect, rel_tol=tol)
