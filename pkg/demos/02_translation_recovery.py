"""Recover an integer translation with delta ("oracle") attention.

If the target is the source shifted by (dx, dy), vertical attention that
picks row h + dy aligns every target column with the source row, and a 1D
correlation along that row then peaks at dx.  The vertical volume mirrors
this.  The all-pairs 4D argmax serves as the referee.
"""

import numpy as np

from factorflow import oracle
from factorflow.features import random_unit_features
from factorflow.pipeline import lookup_both
from factorflow.regression import softargmax_flow

rng = np.random.default_rng(1)
h, w, d, radius = 24, 32, 16, 8
f = random_unit_features(h, w, d, rng)

print(" dx  dy   hit_x   hit_y  referee  soft-argmax err")
for dx, dy in [(0, 0), (5, -3), (-8, 8), (2, 7)]:
    hit_x, hit_y = oracle.translation_recovery(f, dx, dy, radius)
    f2, vols = oracle.translation_volumes(f, dx, dy)
    mask = oracle.interior_mask(h, w, radius)
    ref = oracle.allpairs_hit_rate(f, f2, dx, dy, mask)
    flow = softargmax_flow(*lookup_both(vols, np.zeros((h, w, 2), np.float32), radius), 0.01)
    err = np.linalg.norm(flow[mask] - [dx, dy], axis=-1).mean()
    print(f"{dx:3d} {dy:3d}  {hit_x:6.3f}  {hit_y:6.3f}  {ref:7.3f}  {err:10.4f}")
