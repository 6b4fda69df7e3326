import math

import numpy as np
import pytest

from factorflow import oracle
from factorflow.costvolume import correlate_full
from factorflow.errors import CapExceededError
from factorflow.features import random_unit_features
from factorflow.pipeline import FlowModel, attend_targets


class TestAllPairs:
    def test_ones(self):
        v = oracle.allpairs_4d(np.ones((2, 3, 1)), np.ones((2, 3, 1)))
        assert v.shape == (2, 3, 2, 3) and np.all(v == 1.0)

    def test_self_diagonal(self, rng):
        f = random_unit_features(3, 4, 9, rng)
        v = oracle.allpairs_4d(f, f)
        for h in range(3):
            for w in range(4):
                assert abs(v[h, w, h, w] - 1 / 3) < 1e-6

    def test_duplicate_loop(self, rng):
        f1, f2 = rng.standard_normal((2, 3, 3, 2))
        v = oracle.allpairs_4d(f1, f2)
        for idx in np.ndindex(3, 3, 3, 3):
            want = math.fsum(f1[idx[:2]] * f2[idx[2:]]) / math.sqrt(2)
            assert abs(v[idx] - want) < 1e-12

    def test_swap_symmetry(self, rng):
        f1, f2 = rng.standard_normal((2, 3, 4, 2))
        np.testing.assert_allclose(oracle.allpairs_4d(f1, f2), oracle.allpairs_4d(f2, f1).transpose(2, 3, 0, 1))

    def test_cap(self):
        with pytest.raises(CapExceededError):
            oracle.allpairs_4d(np.zeros((33, 32, 1)), np.zeros((33, 32, 1)))


class TestExpansion:
    def test_scalar_matches_pipeline_everywhere(self, rng):
        h, w, d = 5, 6, 4
        f1 = random_unit_features(h, w, d, rng)
        f2 = random_unit_features(h, w, d, rng)
        f2_v, attn_v, f2_h, attn_h = attend_targets(f1, f2, FlowModel.from_seed(d, seed=7))
        cv_h = correlate_full(f1, f2_v, "horizontal").values
        cv_v = correlate_full(f1, f2_h, "vertical").values
        for y in range(h):
            for x in range(w):
                for r in range(-x, w - x):
                    want = oracle.expand_factorized(y, x, r, attn_v, f1, f2, "horizontal")
                    assert abs(cv_h[y, x, x + r] - want) <= 1e-5 * max(abs(want), 1e-2)
                for r in range(-y, h - y):
                    want = oracle.expand_factorized(y, x, r, attn_h, f1, f2, "vertical")
                    assert abs(cv_v[y, x, y + r] - want) <= 1e-5 * max(abs(want), 1e-2)

    def test_delta_attention_reduces_to_plain_correlation(self, rng):
        f1, f2 = rng.standard_normal((2, 4, 5, 3))
        attn = oracle.oracle_attention(0, 4, 5, "vertical")
        for y, x, r in [(0, 0, 2), (3, 4, -4), (2, 1, 0)]:
            want = float(f1[y, x] @ f2[y, x + r]) / math.sqrt(3)
            assert math.isclose(oracle.expand_factorized(y, x, r, attn, f1, f2), want, rel_tol=1e-12)

    def test_volume_form_agrees_with_scalar(self, rng):
        f1, f2 = rng.standard_normal((2, 3, 4, 4))
        _, attn_v, _, attn_h = attend_targets(f1.astype(np.float32), f2.astype(np.float32), FlowModel.from_seed(4))
        vol = oracle.expand_factorized_volume(attn_v, f1, f2, "horizontal")
        assert math.isclose(vol[1, 2, 3], oracle.expand_factorized(1, 2, 1, attn_v, f1, f2), rel_tol=1e-12)
        vol = oracle.expand_factorized_volume(attn_h, f1, f2, "vertical")
        assert math.isclose(vol[2, 0, 0], oracle.expand_factorized(2, 0, -2, attn_h, f1, f2, "vertical"), rel_tol=1e-12)

    def test_out_of_range(self, rng):
        f = rng.standard_normal((3, 4, 2))
        with pytest.raises(IndexError):
            oracle.expand_factorized(0, 3, 1, oracle.oracle_attention(0, 3, 4), f, f)


class TestOracleAttention:
    def test_zero_shift_identity(self, rng):
        f = rng.standard_normal((4, 3, 2)).astype(np.float32)
        np.testing.assert_array_equal(oracle.apply_oracle(f, 0, "vertical"), f)

    def test_clamp(self):
        a = oracle.oracle_attention(1, 3, 2, "vertical")
        assert a.shape == (2, 3, 3)
        np.testing.assert_array_equal(a[0], [[0, 1, 0], [0, 0, 1], [0, 0, 1]])

    def test_stochastic(self):
        for axis in ("vertical", "horizontal"):
            np.testing.assert_array_equal(oracle.oracle_attention(-2, 4, 5, axis).sum(-1), 1.0)

    def test_rejects_large_shift(self):
        with pytest.raises(ValueError):
            oracle.oracle_attention(3, 3, 5, "vertical")


class TestTranslation:
    def test_zero_shift_exact(self, rng):
        assert oracle.translation_recovery(random_unit_features(10, 12, 16, rng), 0, 0, 3) == (1.0, 1.0)

    def test_shift_and_referee(self, rng):
        f = random_unit_features(24, 32, 16, rng)
        hx, hy = oracle.translation_recovery(f, 5, -3, 8)
        f2 = oracle.shift_features(f, 5, -3)
        ref = oracle.allpairs_hit_rate(f, f2, 5, -3, oracle.interior_mask(24, 32, 8))
        assert hx >= 0.99 and hy >= 0.99
        assert abs(hx - ref) <= 0.01 and abs(hy - ref) <= 0.01

    def test_shift_beyond_radius(self, rng):
        with pytest.raises(ValueError):
            oracle.translation_recovery(random_unit_features(8, 8, 4, rng), 4, 0, 3)

    def test_shift_features_moves_content(self, rng):
        f = rng.standard_normal((5, 6, 2))
        g = oracle.shift_features(f, 2, -1)
        np.testing.assert_array_equal(g[0, 2], f[1, 0])
        assert not g[:, :2].any() and not g[-1].any()


class TestReceptiveField:
    def test_formula(self):
        assert oracle.search_range_size(6, 8, 1) == 33
        assert len(oracle.search_region((3, 4), 6, 8, 1)) == 33

    def test_probe_cross_shape(self, rng):
        f1 = random_unit_features(6, 8, 8, rng)
        f2 = random_unit_features(6, 8, 8, rng)
        model = FlowModel.from_seed(8, seed=1)
        affected, unaffected = oracle.receptive_field_probe(f1, f2, model, (2, 3), 1)
        assert affected == oracle.search_region((2, 3), 6, 8, 1)
        assert len(affected) + len(unaffected) == 48
        assert (0, 3) in affected  # column band, horizontal slab
        assert (5, 6) in unaffected  # outside both bands
