"""Which target pixels can influence one source pixel's lookup?

Perturb each target feature in turn and watch whether the concatenated
lookup slab at a fixed source pixel changes.  The affected set is a cross:
the full-height band of columns within R of the pixel (horizontal volume)
plus the full-width band of rows within R (vertical volume).
"""

import numpy as np

from factorflow import oracle
from factorflow.features import random_unit_features
from factorflow.pipeline import FlowModel

rng = np.random.default_rng(2)
h, w, d, radius = 6, 8, 8, 1
f1, f2 = random_unit_features(h, w, d, rng), random_unit_features(h, w, d, rng)
pixel = (3, 4)

affected, _ = oracle.receptive_field_probe(f1, f2, FlowModel.from_seed(d, seed=2), pixel, radius)
art = np.full((h, w), ".")
for p in affected:
    art[p] = "#"
art[pixel] = "@"
print("\n".join(" ".join(row) for row in art))
print(f"\naffected {len(affected)} pixels; (2R+1)(H+W) - (2R+1)^2 = {oracle.search_range_size(h, w, radius)}")
