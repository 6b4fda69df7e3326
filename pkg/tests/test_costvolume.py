import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorflow.costvolume import CostVolume, concat_lookups, correlate_full, correlate_vjp, lookup, split_lookups
from factorflow.errors import ShapeError
from factorflow.features import random_unit_features
from factorflow.verify import central_difference, scaled_error


def loop_correlate(f1, f2a, direction):
    h, w, d = f1.shape
    n = w if direction == "horizontal" else h
    out = np.zeros((h, w, n))
    for y in range(h):
        for x in range(w):
            for k in range(n):
                other = f2a[y, k] if direction == "horizontal" else f2a[k, x]
                out[y, x, k] = math.fsum(f1[y, x] * other) / math.sqrt(d)
    return out


class TestCorrelate:
    def test_constant_closed_form(self):
        cv = correlate_full(np.full((2, 3, 1), 2.0, np.float32), np.full((2, 3, 1), 3.0, np.float32), "horizontal")
        assert cv.values.shape == (2, 3, 3) and np.all(cv.values == 6.0)

    @pytest.mark.parametrize("direction", ["horizontal", "vertical"])
    def test_self_similarity_diagonal(self, rng, direction):
        f = random_unit_features(4, 5, 16, rng)
        v = correlate_full(f, f, direction).values
        diag = v[np.arange(4)[:, None], np.arange(5)[None, :], np.arange(5)[None, :]] if direction == "horizontal" \
            else v[np.arange(4)[:, None], np.arange(5)[None, :], np.arange(4)[:, None]]
        np.testing.assert_allclose(diag, 0.25, atol=1e-6)
        assert np.all(np.abs(v) <= 0.25 + 1e-6)

    @pytest.mark.parametrize("direction,shape", [("horizontal", (4, 5, 5)), ("vertical", (4, 5, 4))])
    def test_loop_oracle(self, rng, direction, shape):
        f1, f2 = rng.standard_normal((2, 4, 5, 3)).astype(np.float32)
        cv = correlate_full(f1, f2, direction)
        assert cv.values.shape == shape and cv.values.dtype == np.float32
        np.testing.assert_allclose(cv.values, loop_correlate(f1.astype(float), f2.astype(float), direction), atol=1e-5)

    def test_element_count(self, rng):
        f1, f2 = rng.standard_normal((2, 6, 7, 2)).astype(np.float32)
        total = correlate_full(f1, f2, "horizontal").size + correlate_full(f1, f2, "vertical").size
        assert total == 6 * 7 * (6 + 7)

    def test_errors(self):
        with pytest.raises(ShapeError):
            correlate_full(np.zeros((2, 3, 4)), np.zeros((2, 3, 5)), "horizontal")
        with pytest.raises(ValueError):
            correlate_full(np.zeros((2, 3, 4)), np.zeros((2, 3, 4)), "sideways")


class TestLookup:
    def test_zero_flow_centered_window(self, rng):
        v = rng.standard_normal((3, 6, 6)).astype(np.float32)
        slab = lookup(CostVolume("horizontal", v), np.zeros((3, 6, 2), np.float32), 2)
        for x in range(6):
            for r in range(-2, 3):
                want = v[:, x, x + r] if 0 <= x + r < 6 else 0.0
                np.testing.assert_array_equal(slab[:, x, r + 2], want)

    def test_linear_data_is_exact(self):
        v = np.broadcast_to(np.arange(6, dtype=np.float32), (1, 6, 6)).copy()
        flow = np.zeros((1, 6, 2), np.float32)
        flow[0, 0, 0] = 1.5
        np.testing.assert_allclose(lookup(CostVolume("horizontal", v), flow, 1)[0, 0], [0.5, 1.5, 2.5], rtol=0)

    def test_beyond_border_is_zero(self, rng):
        v = rng.standard_normal((2, 5, 5)).astype(np.float32) + 3
        flow = np.zeros((2, 5, 2), np.float32)
        flow[..., 0] = 10.0
        assert not lookup(CostVolume("horizontal", v), flow, 2).any()

    def test_vertical_follows_fy(self, rng):
        v = rng.standard_normal((5, 3, 5)).astype(np.float32)
        flow = np.zeros((5, 3, 2), np.float32)
        flow[..., 0] = 7.0  # fx should be ignored
        flow[..., 1] = 1.0
        slab = lookup(CostVolume("vertical", v), flow, 1)
        np.testing.assert_array_equal(slab[1, :, 1], v[1, :, 2])

    def test_integer_flow_matches_shifted_correlation(self, rng):
        f1, f2 = rng.standard_normal((2, 4, 7, 3)).astype(np.float32)
        cv = correlate_full(f1, f2, "horizontal")
        flow = np.zeros((4, 7, 2), np.float32)
        flow[..., 0] = 2
        slab = lookup(cv, flow, 1)
        direct = loop_correlate(f1.astype(float), f2.astype(float), "horizontal")
        np.testing.assert_allclose(slab[:, 1, :], direct[:, 1, 2:5], atol=1e-5)

    def test_rejects_bad_input(self):
        cv = CostVolume("horizontal", np.zeros((2, 3, 3), np.float32))
        with pytest.raises(ValueError):
            lookup(cv, np.full((2, 3, 2), np.nan, np.float32), 1)
        with pytest.raises(ValueError):
            lookup(cv, np.zeros((2, 3, 2), np.float32), 0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-20, 20), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_interpolation_between_neighbours(self, fx, radius, seed):
        v = np.random.default_rng(seed).standard_normal((1, 9, 9)).astype(np.float32)
        flow = np.zeros((1, 9, 2), np.float32)
        flow[..., 0] = fx
        slab = lookup(CostVolume("horizontal", v), flow, radius)
        bound = np.abs(v).max() + 1e-6
        assert slab.shape == (1, 9, 2 * radius + 1) and np.all(np.abs(slab) <= bound)


class TestConcat:
    def test_marker_layout(self):
        h = np.full((2, 2, 3), 1.0)
        v = np.full((2, 2, 3), 2.0)
        s = concat_lookups(h, v)
        assert s.shape == (2, 2, 6)
        assert np.all(s[..., :3] == 1) and np.all(s[..., 3:] == 2)

    def test_zero(self):
        assert not concat_lookups(np.zeros((1, 1, 5)), np.zeros((1, 1, 5))).any()

    def test_split_round_trip(self, rng):
        a, b = rng.standard_normal((2, 3, 4, 5))
        x, y = split_lookups(concat_lookups(a, b))
        np.testing.assert_array_equal(x, a)
        np.testing.assert_array_equal(y, b)

    def test_mismatch(self):
        with pytest.raises(ShapeError):
            concat_lookups(np.zeros((1, 1, 3)), np.zeros((1, 1, 5)))


class TestCorrelateVJP:
    def test_zero_upstream(self, rng):
        f1, f2 = rng.standard_normal((2, 3, 4, 2))
        for g in correlate_vjp(f1, f2, "horizontal", np.zeros((3, 4, 4))):
            assert not g.any()

    @pytest.mark.parametrize("direction", ["horizontal", "vertical"])
    def test_finite_differences(self, rng, direction):
        f1, f2 = rng.standard_normal((2, 3, 4, 2))
        up = rng.standard_normal((3, 4, 4) if direction == "horizontal" else (3, 4, 3))
        g1, g2 = correlate_vjp(f1, f2, direction, up)
        n1 = central_difference(lambda x: correlate_full(x, f2, direction).values, f1, up)
        n2 = central_difference(lambda x: correlate_full(f1, x, direction).values, f2, up)
        assert scaled_error(g1, n1) <= 1e-4 and scaled_error(g2, n2) <= 1e-4

    def test_hand_formula(self, rng):
        f1, f2 = rng.standard_normal((2, 3, 4, 2))
        up = rng.standard_normal((3, 4, 4))
        g1, _ = correlate_vjp(f1, f2, "horizontal", up)
        for y in range(3):
            for x in range(4):
                want = sum(up[y, x, k] * f2[y, k] for k in range(4)) / math.sqrt(2)
                np.testing.assert_allclose(g1[y, x], want, atol=1e-12)
