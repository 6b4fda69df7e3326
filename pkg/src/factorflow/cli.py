"""Command line front end: ``estimate``, ``verify``, ``bench``, ``attnviz``.

Exit codes: 0 ok, 2 bad arguments, 3 I/O or parse error, 4 verification
failure, 5 size cap exceeded.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import bench, grid, oracle, verify
from .errors import FactorFlowError, MissingInputError, ShapeError
from .features import featurize_image, load_features
from .fileio import encode_flo, encode_pnm, read_flo, read_pgm
from .metrics import epe_report
from .pipeline import SOLVERS, FlowModel, build_volumes, solve, volumes_from_attention
from .regression import upsample_flow
from .viz import attention_line_map, attention_slice_image, flow_to_color, overlay

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_VERIFY, EXIT_CAP = 0, 2, 3, 4, 5


class ArgError(FactorFlowError):
    exit_code = EXIT_ARGS


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(",")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'dx,dy', got {text!r}") from None


def _extent(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'HxW', got {text!r}") from None


def _write_atomic(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _load_inputs(args):
    """Returns ``(f1, f2, gray1 or None)``: features plus the source image when given."""
    if args.img1 and args.img2:
        g1, g2 = read_pgm(args.img1), read_pgm(args.img2)
        if g1.shape != g2.shape:
            raise ShapeError(f"images differ in size: {g1.shape} vs {g2.shape}")
        return featurize_image(g1, args.d), featurize_image(g2, args.d), g1
    if args.feat1 and args.feat2:
        f1, f2 = load_features(args.feat1), load_features(args.feat2)
        if f1.shape != f2.shape:
            raise ShapeError(f"feature maps differ: {f1.shape} vs {f2.shape}")
        return f1, f2, None
    raise ArgError("give either --img1/--img2 or --feat1/--feat2")


def _load_model(args, d: int, radius: int | None) -> FlowModel:
    if args.weights:
        if not Path(args.weights).is_file():
            raise MissingInputError(f"weights file not found: {args.weights}")
        model = FlowModel.load(args.weights)
        if model.dim != d:
            raise ShapeError(f"weights are {model.dim}-dimensional, features have D={d}")
        return model
    return FlowModel.from_seed(d, radius, seed=args.seed)


def _volumes(args, f1, f2, model):
    if args.oracle_shift is not None:
        dx, dy = args.oracle_shift
        h, w, _ = f1.shape
        try:
            return volumes_from_attention(
                f1, f2, oracle.oracle_attention(dy, h, w, "vertical"), oracle.oracle_attention(dx, h, w, "horizontal")
            )
        except ValueError as exc:
            raise ArgError(str(exc)) from None
    return build_volumes(f1, f2, model)


def cmd_estimate(args) -> int:
    f1, f2, gray = _load_inputs(args)
    d = f1.shape[2]
    need_update = args.solver == "gru"
    model = None
    if args.oracle_shift is None or need_update:
        model = _load_model(args, d, args.radius if need_update else None)
        if need_update and model.update is None:
            raise ShapeError("weights file has no update-block tensors; use --solver softargmax")
    volumes = _volumes(args, f1, f2, model)
    flow = solve(f1, volumes, args.radius, args.solver, model, args.iters, args.temperature)[-1]
    if gray is not None:
        flow = upsample_flow(flow, 8)[: gray.shape[0], : gray.shape[1]]

    outputs = {args.out: encode_flo(flow)}
    if args.viz:
        outputs[args.viz] = encode_pnm(flow_to_color(flow, args.viz_max))
    report = None
    if args.gt:
        gt = read_flo(args.gt)
        if gt.shape != flow.shape:
            raise ShapeError(f"ground truth is {gt.shape[:2]}, estimate is {flow.shape[:2]}")
        report = epe_report(flow, gt, in_frame_mask(gt))
    for path, data in outputs.items():
        _write_atomic(path, data)
    if report is not None:
        sys.stdout.write(report.to_csv())
    return EXIT_OK


def in_frame_mask(gt: np.ndarray) -> np.ndarray:
    """Pixels whose ground-truth target lands inside the frame."""
    h, w, _ = gt.shape
    x = np.arange(w)[None, :] + gt[..., 0]
    y = np.arange(h)[:, None] + gt[..., 1]
    return (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    names = list(verify.SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        kw = {"seed": args.seed}
        for key in ("h", "w", "d", "r"):
            value = getattr(args, key)
            if value is not None and not (key == "r" and name in ("equivalence", "gradcheck")):
                kw[key] = value
        if name == "translation":
            kw.update(shift=args.shift, temperature=args.temperature)
        for check in verify.SUITES[name](**kw):
            print(check.line())
            ok &= check.ok
    print(f"summary status={'PASS' if ok else 'FAIL'} suites={','.join(names)}")
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------------------
# bench / attnviz


def cmd_bench(args) -> int:
    points = bench.sweep_points(args.start, args.stop, args.steps)
    records = bench.run_sweep(points, args.d, args.mode, args.measure_cap, args.seed)
    text = bench.records_to_csv(records)
    if args.out:
        _write_atomic(args.out, text.encode())
    else:
        sys.stdout.write(text)
    s_all, s_fac = bench.scaling_slopes(records)
    print(f"slope allpairs={s_all:.4f} factorized={s_fac:.4f}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_attnviz(args) -> int:
    f1, f2, gray = _load_inputs(args)
    h, w, d = f1.shape
    if args.oracle_shift is not None:
        vols = _volumes(args, f1, f2, None)
    else:
        vols = build_volumes(f1, f2, _load_model(args, d, None))
    attn = vols.attn_v if args.axis == "vertical" else vols.attn_h
    n_slices = attn.shape[0]
    index = n_slices // 2 if args.index is None else args.index
    if not 0 <= index < n_slices:
        raise ArgError(f"--index {index} is outside [0, {n_slices}) for {args.axis} attention")
    line = attn.shape[1] // 2 if args.line is None else args.line
    if not 0 <= line < attn.shape[1]:
        raise ArgError(f"--line {line} is outside [0, {attn.shape[1]})")
    outputs = {args.out: encode_pnm(attention_slice_image(attn, index))}
    if args.overlay:
        base = gray if gray is not None else np.full((h * 8, w * 8), 0.5, dtype=np.float32)
        outputs[args.overlay] = encode_pnm(overlay(base, attention_line_map(attn, line, args.axis)))
    for path, data in outputs.items():
        _write_atomic(path, data)
    return EXIT_OK


def _add_inputs(p):
    p.add_argument("--img1", help="source image (binary PGM/PPM)")
    p.add_argument("--img2", help="target image (binary PGM/PPM)")
    p.add_argument("--feat1", help="source features (F1DF)")
    p.add_argument("--feat2", help="target features (F1DF)")
    p.add_argument("--weights", help="model weights (F1DW); seeded random weights otherwise")
    p.add_argument("--d", type=int, default=64, help="feature channels when featurizing images (default 64)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle-shift", type=_pair, metavar="DX,DY",
                   help="replace learned attention by delta attention for a known integer shift (feature cells)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="factorflow", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=1, help="worker threads for grid kernels")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate flow for an image or feature pair")
    _add_inputs(p)
    p.add_argument("--radius", type=int, default=32)
    p.add_argument("--iters", type=int, default=12)
    p.add_argument("--solver", choices=SOLVERS, default="gru")
    p.add_argument("--temperature", type=float, default=0.01, help="soft-argmax temperature")
    p.add_argument("--gt", help="ground-truth .flo; prints an EvalReport CSV")
    p.add_argument("--out", required=True, help="output .flo")
    p.add_argument("--viz", help="output flow colour image (PPM)")
    p.add_argument("--viz-max", type=float, default=None, help="fixed magnitude for colour normalisation")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("verify", help="run oracle verification suites")
    p.add_argument("--suite", choices=[*verify.SUITES, "all"], default="all")
    p.add_argument("--h", type=int)
    p.add_argument("--w", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--shift", type=_pair, default=(5, -3), metavar="DX,DY")
    p.add_argument("--temperature", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="memory scaling sweep")
    p.add_argument("--start", type=_extent, default=(64, 64), metavar="HxW")
    p.add_argument("--stop", type=_extent, default=(512, 512), metavar="HxW")
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--mode", choices=("analytic", "measured"), default="analytic")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--measure-cap", type=int, default=bench.DEFAULT_MEASURE_CAP,
                   help="skip measuring points whose volumes+features exceed this many bytes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (stdout otherwise)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("attnviz", help="render one attention slice")
    _add_inputs(p)
    p.add_argument("--axis", choices=("vertical", "horizontal"), default="vertical")
    p.add_argument("--index", type=int, help="column (vertical) or row (horizontal) of the slice")
    p.add_argument("--line", type=int, help="query row (vertical) or column (horizontal) for the overlay")
    p.add_argument("--out", required=True, help="output slice image (PGM)")
    p.add_argument("--overlay", help="output overlay composite (PPM)")
    p.set_defaults(func=cmd_attnviz)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    grid.set_num_threads(args.threads)
    try:
        return args.func(args)
    except FactorFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
