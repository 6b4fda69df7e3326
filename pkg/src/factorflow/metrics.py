"""End-point error, KITTI-style outlier rate and speed-binned EPE."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import EmptyValidSetError, ShapeError

SPEED_BINS = ((0.0, 10.0), (10.0, 40.0), (40.0, np.inf))
OUTLIER_PX = 3.0
OUTLIER_REL = 0.05


@dataclass(frozen=True)
class EvalReport:
    """Bin EPEs are 0.0 for empty bins; the ``n_*`` counts tell them apart."""

    epe: float
    f1_all: float
    s0_10: float
    s10_40: float
    s40plus: float
    valid_count: int
    n0_10: int
    n10_40: int
    n40plus: int

    def csv_header(self) -> str:
        return ",".join(f.name for f in fields(self))

    def csv_row(self) -> str:
        return ",".join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in asdict(self).values())

    def to_csv(self) -> str:
        return f"{self.csv_header()}\n{self.csv_row()}\n"


def endpoint_error(flow: np.ndarray, gt: np.ndarray) -> np.ndarray:
    diff = np.asarray(flow, dtype=np.float64) - np.asarray(gt, dtype=np.float64)
    return np.sqrt((diff * diff).sum(axis=-1))


def epe_report(flow: np.ndarray, gt: np.ndarray, valid: np.ndarray | None = None) -> EvalReport:
    if np.shape(flow) != np.shape(gt) or np.ndim(flow) != 3 or np.shape(flow)[-1] != 2:
        raise ShapeError(f"flow {np.shape(flow)} and ground truth {np.shape(gt)} must both be H x W x 2")
    if valid is None:
        valid = np.ones(np.shape(flow)[:2], dtype=bool)
    elif np.shape(valid) != np.shape(flow)[:2]:
        raise ShapeError(f"valid mask {np.shape(valid)} does not match flow {np.shape(flow)[:2]}")
    valid = np.asarray(valid, dtype=bool)
    if not valid.any():
        raise EmptyValidSetError("no valid pixels to evaluate")

    err = endpoint_error(flow, gt)[valid]
    mag = np.sqrt((np.asarray(gt, dtype=np.float64) ** 2).sum(axis=-1))[valid]
    outlier = (err > OUTLIER_PX) & (err > OUTLIER_REL * mag)

    bins, counts = [], []
    for lo, hi in SPEED_BINS:
        sel = (mag >= lo) & (mag < hi)
        counts.append(int(sel.sum()))
        bins.append(float(err[sel].mean()) if sel.any() else 0.0)
    return EvalReport(
        epe=float(err.mean()),
        f1_all=100.0 * float(outlier.mean()),
        s0_10=bins[0],
        s10_40=bins[1],
        s40plus=bins[2],
        valid_count=int(valid.sum()),
        n0_10=counts[0],
        n10_40=counts[1],
        n40plus=counts[2],
    )
