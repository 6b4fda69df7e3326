"""Attention then correlation equals a weighted sum of raw dot products.

The horizontal cost volume is built by first mixing each target column with
vertical cross attention and then correlating along the row.  Expanding the
mixed feature shows that every entry is an attention-weighted sum of plain
pixel-to-pixel correlations, i.e. a reweighted slice of the all-pairs volume.
This script builds both sides for one small instance and prints the gap.
"""

import numpy as np

from factorflow import oracle
from factorflow.features import random_unit_features
from factorflow.pipeline import FlowModel, build_volumes

rng = np.random.default_rng(0)
h, w, d = 5, 6, 8
f1 = random_unit_features(h, w, d, rng)
f2 = random_unit_features(h, w, d, rng)
model = FlowModel.from_seed(d, seed=0)

vols = build_volumes(f1, f2, model)
print(f"horizontal volume {vols.horizontal.values.shape}, vertical volume {vols.vertical.values.shape}")

# one entry by hand: source pixel (2, 1), displacement +3 along the row
y, x, r = 2, 1, 3
print("pipeline entry :", float(vols.horizontal.values[y, x, x + r]))
print("expanded sum   :", oracle.expand_factorized(y, x, r, vols.attn_v, f1, f2, "horizontal"))

# every entry at once, via the 4D volume
ref_h = oracle.expand_factorized_volume(vols.attn_v, f1, f2, "horizontal")
ref_v = oracle.expand_factorized_volume(vols.attn_h, f1, f2, "vertical")
print("max |gap| horizontal:", np.abs(vols.horizontal.values - ref_h).max())
print("max |gap| vertical  :", np.abs(vols.vertical.values - ref_v).max())

print(f"\nstorage: {vols.horizontal.size + vols.vertical.size} floats vs {(h * w) ** 2} for all pairs")
