"""Dense grid arithmetic shared by every stage of the pipeline.

Grids are plain numpy arrays.  The only non-trivial piece is the matrix
product: it is dispatched over *fixed* slices of the batch (or row) axis,
each slice evaluated by single-threaded BLAS.  The slice layout depends on
the operand shapes alone, never on the worker count, so results are bitwise
identical for any ``set_num_threads`` value.
"""

from __future__ import annotations

import contextlib
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from threadpoolctl import ThreadpoolController

from .errors import ShapeError

DTYPE = np.float32

_BATCH_CHUNK = 8
_ROW_CHUNK = 2048

_num_threads = 1
_controller = None


def set_num_threads(n: int) -> None:
    global _num_threads
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    _num_threads = int(n)


def get_num_threads() -> int:
    return _num_threads


@contextlib.contextmanager
def num_threads(n: int):
    prev = _num_threads
    set_num_threads(n)
    try:
        yield
    finally:
        set_num_threads(prev)


@contextlib.contextmanager
def _single_blas():
    global _controller
    if os.environ.get("FACTORFLOW_NO_BLAS_LIMIT"):
        yield
        return
    if _controller is None:
        _controller = ThreadpoolController()
    with _controller.limit(limits=1, user_api="blas"):
        yield


def _run_slices(fn, n: int, chunk: int) -> None:
    slices = [slice(i, min(i + chunk, n)) for i in range(0, n, chunk)]
    with _single_blas():
        if _num_threads == 1 or len(slices) == 1:
            for s in slices:
                fn(s)
        else:
            with ThreadPoolExecutor(max_workers=_num_threads) as pool:
                list(pool.map(fn, slices))


def matmul_last2(a: np.ndarray, b: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Batched product ``out[b] = a[b] @ b[b]`` for B x M x K and B x K x N operands.

    ``out`` may be a strided view (e.g. a transposed buffer); it is written in
    place and returned.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 3 or b.ndim != 3:
        raise ShapeError(f"matmul_last2 expects 3-d operands, got {a.shape} and {b.shape}")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"batch extents differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[2] != b.shape[1]:
        raise ShapeError(f"inner extents differ: a is {a.shape}, b is {b.shape}")
    batch, m, _ = a.shape
    n = b.shape[2]
    dtype = np.result_type(a, b)
    if out is None:
        out = np.empty((batch, m, n), dtype=dtype)
    elif out.shape != (batch, m, n):
        raise ShapeError(f"out has shape {out.shape}, expected {(batch, m, n)}")

    def work(s):
        np.matmul(a[s], b[s], out=out[s])

    _run_slices(work, batch, _BATCH_CHUNK)
    return out


def linear(x: np.ndarray, w: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Per-pixel affine map over the last axis: ``x @ w + bias``."""
    x = np.asarray(x)
    w = np.asarray(w)
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise ShapeError(f"cannot apply {w.shape} weights to input of shape {x.shape}")
    if bias is not None and bias.shape != (w.shape[1],):
        raise ShapeError(f"bias shape {bias.shape} does not match output width {w.shape[1]}")
    lead = x.shape[:-1]
    flat = np.ascontiguousarray(x).reshape(-1, w.shape[0])
    out = np.empty((flat.shape[0], w.shape[1]), dtype=np.result_type(x, w))

    def work(s):
        np.matmul(flat[s], w, out=out[s])

    _run_slices(work, flat.shape[0], _ROW_CHUNK)
    if bias is not None:
        out += bias
    return out.reshape(*lead, w.shape[1])


def softmax_last(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise ShapeError(f"softmax needs a non-empty last axis, got shape {x.shape}")
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    e /= e.sum(axis=-1, keepdims=True)
    return e


def permute(x: np.ndarray, order) -> np.ndarray:
    order = tuple(int(o) for o in order)
    if sorted(order) != list(range(np.ndim(x))):
        raise ShapeError(f"{order} is not a permutation of the {np.ndim(x)} axes")
    return np.transpose(x, order)


def reshape(x: np.ndarray, dims) -> np.ndarray:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims) or int(np.prod(dims)) != np.size(x):
        raise ShapeError(f"cannot reshape {np.size(x)} elements into {dims}")
    return np.reshape(x, dims)
