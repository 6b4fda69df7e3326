"""Render vertical attention for one image column.

A slice is an H x H matrix: row h holds the weights query h puts on every
target row of the same column.  Delta attention draws a shifted diagonal;
attention with all-zero projections is flat at 1/H.
"""

from pathlib import Path

import numpy as np

from factorflow import oracle
from factorflow.attention import AttentionWeights, cross_attention_1d, positional_encoding
from factorflow.features import random_unit_features
from factorflow.fileio import write_pgm
from factorflow.viz import attention_slice_image

out = Path("demo_out")
out.mkdir(exist_ok=True)
rng = np.random.default_rng(4)
h, w, d = 12, 16, 16
f1, f2 = random_unit_features(h, w, d, rng), random_unit_features(h, w, d, rng)
pe = positional_encoding(h, w, d)

_, learned = cross_attention_1d(f1, f2, "vertical", AttentionWeights.random(d, rng), pe)
_, flat = cross_attention_1d(f1, f2, "vertical", AttentionWeights.zeros(d), pe)
delta = oracle.oracle_attention(2, h, w, "vertical")

for name, attn in [("random", learned), ("zero", flat), ("delta", delta)]:
    img = attention_slice_image(attn, w // 2)
    write_pgm(img, out / f"attn_{name}.pgm")
    print(f"{name:>6}: slice {img.shape}, row sums {attn[w // 2].sum(-1).min():.3f}..{attn[w // 2].sum(-1).max():.3f}, "
          f"peak weight {attn[w // 2].max():.3f}")
