"""Factorized 1D attention / 1D correlation cost volumes for optical flow."""

from .attention import (
    AttentionWeights,
    attend_vjp,
    cross_attention_1d,
    positional_encoding,
    self_attention_1d,
)
from .costvolume import CostVolume, concat_lookups, correlate_full, correlate_vjp, lookup, split_lookups
from .features import featurize_image, load_features, save_features
from .fileio import read_flo, read_pgm, read_ppm, write_flo, write_pgm, write_ppm
from .metrics import EvalReport, epe_report
from .pipeline import FlowModel, Volumes, build_volumes, solve, volumes_from_attention
from .regression import iterate, softargmax_flow, upsample_flow

__version__ = "0.1.0"

__all__ = [
    "AttentionWeights", "attend_vjp", "cross_attention_1d", "positional_encoding", "self_attention_1d",
    "CostVolume", "concat_lookups", "correlate_full", "correlate_vjp", "lookup", "split_lookups",
    "featurize_image", "load_features", "save_features",
    "read_flo", "read_pgm", "read_ppm", "write_flo", "write_pgm", "write_ppm",
    "EvalReport", "epe_report",
    "FlowModel", "Volumes", "build_volumes", "solve", "volumes_from_attention",
    "iterate", "softargmax_flow", "upsample_flow",
]
