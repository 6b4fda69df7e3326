import math

import numpy as np
import pytest

from factorflow.costvolume import CostVolume
from factorflow.errors import ShapeError
from factorflow.features import random_unit_features
from factorflow.pipeline import FlowModel, build_volumes
from factorflow.regression import (
    UpdateState,
    UpdateWeights,
    conv3x3,
    downsample_flow,
    flow_head,
    gru_update,
    iterate,
    motion_encode,
    softargmax_flow,
    upsample_flow,
)

SMALL = dict(hidden=4, context=3, motion=5, head=6)


def small_weights(rng, radius=1, d=4, dtype=np.float64):
    return UpdateWeights.random(d, radius, rng, dtype=dtype, **SMALL)


def relu(x):
    return max(x, 0.0)


def sig(x):
    return 1 / (1 + math.exp(-x))


class TestMotionEncoder:
    def test_zero_weights(self, rng):
        w = UpdateWeights.zeros(4, 1, **SMALL)
        assert not motion_encode(rng.standard_normal((2, 2, 6)), np.ones((2, 2, 2)), w).any()

    def test_nonnegative(self, rng):
        w = small_weights(rng)
        assert motion_encode(rng.standard_normal((3, 3, 6)), rng.standard_normal((3, 3, 2)), w).min() >= 0

    def test_loop_oracle(self, rng):
        w = small_weights(rng)
        w.motion_b1[:] = rng.standard_normal(5)
        slab, flow = rng.standard_normal((2, 2, 6)), rng.standard_normal((2, 2, 2))
        got = motion_encode(slab, flow, w)
        for y in range(2):
            for x in range(2):
                inp = list(slab[y, x]) + list(flow[y, x])
                a = [relu(sum(inp[i] * w.motion_w1[i, j] for i in range(8)) + w.motion_b1[j]) for j in range(5)]
                b = [relu(sum(a[i] * w.motion_w2[i, j] for i in range(5)) + w.motion_b2[j]) for j in range(5)]
                np.testing.assert_allclose(got[y, x], b, atol=1e-12)

    def test_channel_mismatch(self, rng):
        with pytest.raises(ShapeError):
            motion_encode(np.zeros((2, 2, 10)), np.zeros((2, 2, 2)), small_weights(rng))


class TestGRU:
    def test_zero_kernels_halve_hidden(self, rng):
        w = UpdateWeights.zeros(4, 1, **SMALL)
        h = np.tanh(rng.standard_normal((3, 4, 4)))
        out = gru_update(UpdateState(h, rng.standard_normal((3, 4, 3))), rng.standard_normal((3, 4, 5)), w)
        np.testing.assert_allclose(out.hidden, 0.5 * h, rtol=1e-15)

    def test_strictly_bounded(self, rng):
        w = small_weights(rng)
        h = np.tanh(rng.standard_normal((4, 4, 4)))
        out = gru_update(UpdateState(h, rng.standard_normal((4, 4, 3))), rng.standard_normal((4, 4, 5)), w)
        assert np.all(np.abs(out.hidden) < 1)

    def test_contractive_under_saturation(self, rng):
        # huge kernels saturate tanh to exactly +-1 in floating point; the bound still holds
        w = small_weights(rng)
        for k in (w.kz, w.kr, w.kh):
            k *= 20
        h = np.tanh(3 * rng.standard_normal((4, 4, 4)))
        out = gru_update(UpdateState(h, rng.standard_normal((4, 4, 3))), 5 * rng.standard_normal((4, 4, 5)), w)
        assert np.abs(out.hidden).max() <= max(np.abs(h).max(), 1.0)

    def test_conv_oracle(self, rng):
        x = rng.standard_normal((2, 2, 3))
        k = rng.standard_normal((3, 3, 3, 2))
        b = rng.standard_normal(2)
        got = conv3x3(x, k, b)
        for y in range(2):
            for xx in range(2):
                for o in range(2):
                    acc = b[o]
                    for a in range(3):
                        for c in range(3):
                            yy, xc = y + a - 1, xx + c - 1
                            if 0 <= yy < 2 and 0 <= xc < 2:
                                acc += x[yy, xc] @ k[a, c, :, o]
                    assert abs(got[y, xx, o] - acc) < 1e-12

    def test_gru_oracle_2x2(self, rng):
        w = small_weights(rng)
        h = np.tanh(rng.standard_normal((2, 2, 4)))
        ctx, mot = rng.standard_normal((2, 2, 3)), rng.standard_normal((2, 2, 5))
        got = gru_update(UpdateState(h, ctx), mot, w).hidden
        hx = np.concatenate([h, ctx, mot], -1)
        z = 1 / (1 + np.exp(-conv3x3(hx, w.kz, w.kz_b)))
        r = 1 / (1 + np.exp(-conv3x3(hx, w.kr, w.kr_b)))
        q = np.tanh(conv3x3(np.concatenate([r * h, ctx, mot], -1), w.kh, w.kh_b))
        np.testing.assert_allclose(got, (1 - z) * h + z * q, atol=1e-12)


class TestFlowHead:
    def test_zero_weights(self, rng):
        assert not flow_head(rng.standard_normal((2, 3, 4)), UpdateWeights.zeros(4, 1, **SMALL)).any()

    def test_loop_oracle(self, rng):
        w = small_weights(rng)
        w.head_b2[:] = [0.3, -0.2]
        hid = rng.standard_normal((2, 2, 4))
        got = flow_head(hid, w)
        for y in range(2):
            for x in range(2):
                a = [relu(hid[y, x] @ w.head_w1[:, j] + w.head_b1[j]) for j in range(6)]
                np.testing.assert_allclose(got[y, x], np.array(a) @ w.head_w2 + w.head_b2, atol=1e-12)

    def test_additive(self, rng):
        f1 = random_unit_features(4, 5, 4, rng)
        model = FlowModel.from_seed(4, radius=1, seed=2, **SMALL)
        vols = build_volumes(f1, random_unit_features(4, 5, 4, rng), model)
        flows, hiddens = iterate(f1, vols.pair, model.update, 2, 1, return_hidden=True)
        step = flow_head(hiddens[1], model.update)
        np.testing.assert_array_equal(flows[1], flows[0] + step)


class TestIterate:
    def test_zero_weights_zero_flow(self, rng):
        f1 = random_unit_features(3, 4, 4, rng)
        vols = (CostVolume("horizontal", rng.standard_normal((3, 4, 4)).astype(np.float32)),
                CostVolume("vertical", rng.standard_normal((3, 4, 3)).astype(np.float32)))
        flows = iterate(f1, vols, UpdateWeights.zeros(4, 2, **SMALL), 1, 2)
        assert len(flows) == 1 and not flows[0].any()

    def test_length_and_determinism(self, rng):
        f1, f2 = random_unit_features(5, 6, 8, rng), random_unit_features(5, 6, 8, rng)
        model = FlowModel.from_seed(8, radius=2, seed=5)
        vols = build_volumes(f1, f2, model)
        a = iterate(f1, vols.pair, model.update, 4, 2)
        b = iterate(f1, build_volumes(f1, f2, FlowModel.from_seed(8, radius=2, seed=5)).pair, model.update, 3, 2)
        assert len(a) == 4
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_errors(self, rng):
        f1 = random_unit_features(3, 4, 4, rng)
        vols = (CostVolume("horizontal", np.zeros((3, 4, 4), np.float32)), CostVolume("vertical", np.zeros((3, 4, 3), np.float32)))
        with pytest.raises(ValueError):
            iterate(f1, vols, UpdateWeights.zeros(4, 1, **SMALL), 0, 1)
        with pytest.raises(ShapeError):
            iterate(f1, vols, UpdateWeights.zeros(4, 1, **SMALL), 1, 2)


class TestSoftArgmax:
    def test_uniform_slab(self):
        flow = softargmax_flow(np.ones((2, 2, 7)), np.ones((2, 2, 7)), 0.5)
        np.testing.assert_allclose(flow, 0.0, atol=1e-12)

    def test_delta_limit(self):
        slab = np.zeros((1, 1, 9))
        slab[0, 0, 4 + 3] = 1.0
        flow = softargmax_flow(slab, np.zeros((1, 1, 9)), 0.01)
        assert abs(flow[0, 0, 0] - 3) <= 1e-3

    def test_within_radius(self, rng):
        flow = softargmax_flow(rng.standard_normal((4, 4, 5)) * 10, rng.standard_normal((4, 4, 5)) * 10, 0.05)
        assert np.all(np.abs(flow) <= 2)

    def test_oracle_translation_instance(self):
        from factorflow.verify import translation_metrics

        f = random_unit_features(24, 32, 16, np.random.default_rng(0))
        assert translation_metrics(f, 4, 2, 8)["softargmax_err"] <= 0.5

    def test_rejects_temperature(self):
        with pytest.raises(ValueError):
            softargmax_flow(np.zeros((1, 1, 3)), np.zeros((1, 1, 3)), 0.0)


class TestUpsample:
    def test_constant_scaled(self):
        up = upsample_flow(np.broadcast_to(np.array([1.0, 2.0], np.float32), (3, 4, 2)).copy(), 8)
        assert up.shape == (24, 32, 2)
        np.testing.assert_array_equal(up[..., 0], 8.0)
        np.testing.assert_array_equal(up[..., 1], 16.0)

    def test_round_trip_constant(self):
        flow = np.broadcast_to(np.array([-0.5, 3.0]), (2, 5, 2)).copy()
        np.testing.assert_allclose(downsample_flow(upsample_flow(flow, 8), 8), flow, rtol=1e-14)

    def test_bilinear_ramp(self):
        flow = np.zeros((1, 2, 2))
        flow[0, 1, 0] = 1.0
        up = upsample_flow(flow, 4)
        np.testing.assert_allclose(up[0, :, 0], 4 * np.arange(8) / 7)

    def test_factor_one_identity(self, rng):
        flow = rng.standard_normal((3, 3, 2))
        np.testing.assert_allclose(upsample_flow(flow, 1), flow, rtol=1e-15)
