"""Heatmap encode/decode and BCE tests against independent oracles."""

import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from interkey.codec import (CodecConfig, decode_local_softargmax, encode_interaction,
                            encode_keypoints, heatmap_bce)
from interkey.keypoints import KeypointSet

CFG = CodecConfig()
W = H = 48


def interaction_oracle(modified, sigma, k, width, height):
    """Direct per-pixel evaluation of the interaction-map definition."""
    active = {idx: (x, y) for idx, x, y in modified}
    out = np.zeros((k, height, width))
    for n in range(k):
        if n not in active:
            continue
        x, y = active[n]
        for j in range(height):
            for i in range(width):
                out[n, j, i] = math.exp(((i - x) ** 2 + (j - y) ** 2) / (-2.0 * sigma ** 2))
    return out


def dense_softargmax_oracle(channel, window_radius, temperature):
    """Soft-argmax centroid computed with plain nested loops."""
    h, w = channel.shape
    py, px = np.unravel_index(np.argmax(channel), channel.shape)
    y0, y1 = max(0, py - window_radius), min(h, py + window_radius + 1)
    x0, x1 = max(0, px - window_radius), min(w, px + window_radius + 1)
    vals = channel[y0:y1, x0:x1] / temperature
    e = np.exp(vals - vals.max())
    e /= e.sum()
    cx = sum(e[j, i] * (x0 + i) for j in range(e.shape[0]) for i in range(e.shape[1]))
    cy = sum(e[j, i] * (y0 + j) for j in range(e.shape[0]) for i in range(e.shape[1]))
    return cx, cy


class TestEncodeKeypoints:
    def test_peak_at_center(self):
        hm = encode_keypoints(KeypointSet([[10, 10]]), CFG, W, H)
        assert hm[0, 10, 10] == pytest.approx(1.0)

    def test_closed_form_offset(self):
        hm = encode_keypoints(KeypointSet([[10, 10]]), CFG, W, H)
        assert hm[0, 10, 12].item() == pytest.approx(math.exp(-0.5), abs=1e-6)

    def test_invisible_keypoint_zero_channel(self):
        kps = KeypointSet([[10, 10], [20, 20]], [True, False])
        hm = encode_keypoints(kps, CFG, W, H)
        assert hm[1].abs().max() == 0

    def test_k_mismatch_rejected(self):
        with pytest.raises(ValueError):
            encode_keypoints(KeypointSet([[10, 10]]), CFG, W, H, k=5)

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError):
            encode_keypoints(KeypointSet([[W + 3.0, 10]]), CFG, W, H)


class TestEncodeInteraction:
    def test_empty_modifications(self):
        u = encode_interaction([], CFG, 4, W, H)
        assert u.shape == (4, H, W) and u.abs().max() == 0

    def test_single_click_peak_and_zeros(self):
        u = encode_interaction([(2, 20, 30)], CFG, 6, W, H)
        assert u[2, 30, 20] == pytest.approx(1.0)
        mask = torch.ones(6, dtype=torch.bool)
        mask[2] = False
        assert u[mask].abs().max() == 0

    def test_two_clicks_match_oracle(self):
        mods = [(0, 5.0, 7.0), (4, 30.0, 12.0)]
        u = encode_interaction(mods, CFG, 6, W, H).double().numpy()
        expected = interaction_oracle(mods, CFG.sigma, 6, W, H)
        assert np.abs(u - expected).max() < 1e-6
        assert (np.abs(u).sum(axis=(1, 2)) > 0).sum() == 2

    def test_duplicate_index_rejected(self):
        with pytest.raises(ValueError):
            encode_interaction([(1, 5, 5), (1, 6, 6)], CFG, 4, W, H)

    def test_out_of_range_index_rejected(self):
        with pytest.raises(ValueError):
            encode_interaction([(9, 5, 5)], CFG, 4, W, H)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 3), st.floats(5, 40), st.floats(5, 40))
    def test_channel_permutation_equivariance(self, idx, x, y):
        u1 = encode_interaction([(idx, x, y)], CFG, 4, W, H)
        u2 = encode_interaction([(0, x, y)], CFG, 4, W, H)
        assert torch.equal(u1[idx], u2[0])


class TestDecode:
    def test_integer_center_exact(self):
        hm = encode_keypoints(KeypointSet([[10, 10]]), CFG, W, H, dtype=torch.float64)
        coords, low = decode_local_softargmax(hm, CFG)
        assert coords[0].numpy() == pytest.approx([10.0, 10.0], abs=1e-6)
        assert not low[0]

    def test_subpixel_roundtrip_vs_oracle(self):
        hm = encode_keypoints(KeypointSet([[10.5, 10.0]]), CFG, W, H, dtype=torch.float64)
        coords, _ = decode_local_softargmax(hm, CFG)
        assert abs(coords[0, 0].item() - 10.5) < 0.1
        assert abs(coords[0, 1].item() - 10.0) < 0.1
        ox, oy = dense_softargmax_oracle(hm[0].numpy(), CFG.window_radius, CFG.temperature)
        assert coords[0].numpy() == pytest.approx([ox, oy], abs=1e-9)

    def test_uniform_window_gives_center(self):
        hm = torch.full((1, H, W), 0.5, dtype=torch.float64)
        coords, _ = decode_local_softargmax(hm, CFG)
        # argmax lands at (0, 0); the clipped window centroid is its mean
        assert coords[0].numpy() == pytest.approx([CFG.window_radius / 2 + 0.0,
                                                   CFG.window_radius / 2 + 0.0], abs=1.0)

    def test_all_zero_channel_flagged(self):
        hm = torch.zeros(1, H, W)
        coords, low = decode_local_softargmax(hm, CFG)
        assert bool(low[0])
        assert np.isfinite(coords.numpy()).all()

    def test_nonfinite_rejected(self):
        hm = torch.zeros(1, H, W)
        hm[0, 3, 3] = float("nan")
        with pytest.raises(ValueError):
            decode_local_softargmax(hm, CFG)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(16, 32), st.integers(16, 32))
    def test_roundtrip_interior_integer_points(self, x, y):
        hm = encode_keypoints(KeypointSet([[x, y]]), CFG, W, H, dtype=torch.float64)
        coords, _ = decode_local_softargmax(hm, CFG)
        assert np.linalg.norm(coords[0].numpy() - [x, y]) < 0.5

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        base = encode_keypoints(KeypointSet([[20.3, 17.6]]), CFG, W, H, dtype=torch.float64)
        base += 0.01 * torch.from_numpy(rng.random((1, H, W)))
        hm = base.clone().requires_grad_(True)
        coords, _ = decode_local_softargmax(hm, CFG)
        coords[0, 0].backward()
        analytic = hm.grad.clone()
        eps = 1e-6
        checked = 0
        for (j, i) in [(18, 20), (17, 21), (16, 19), (18, 23)]:
            hp = base.clone()
            hp[0, j, i] += eps
            hm_ = base.clone()
            hm_[0, j, i] -= eps
            cp, _ = decode_local_softargmax(hp, CFG)
            cm, _ = decode_local_softargmax(hm_, CFG)
            fd = (cp[0, 0] - cm[0, 0]).item() / (2 * eps)
            if abs(fd) > 1e-8:
                assert abs(analytic[0, j, i].item() - fd) / abs(fd) < 1e-4
                checked += 1
        assert checked > 0


class TestHeatmapBce:
    def test_half_maps_give_ln2(self):
        p = torch.full((2, 8, 8), 0.5)
        assert heatmap_bce(p, p).item() == pytest.approx(math.log(2), abs=1e-6)

    def test_minimum_at_target(self):
        rng = np.random.default_rng(0)
        t = torch.from_numpy(rng.random((1, 6, 6)))
        floor = heatmap_bce(t, t)
        for _ in range(5):
            other = torch.from_numpy(rng.random((1, 6, 6)))
            assert heatmap_bce(other, t) >= floor

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(1)
        p = rng.uniform(0.05, 0.95, size=(1, 4, 4))
        t = rng.uniform(0.0, 1.0, size=(1, 4, 4))
        total = 0.0
        for j in range(4):
            for i in range(4):
                total += -(t[0, j, i] * math.log(p[0, j, i])
                           + (1 - t[0, j, i]) * math.log(1 - p[0, j, i]))
        expected = total / 16
        got = heatmap_bce(torch.from_numpy(p), torch.from_numpy(t)).item()
        assert got == pytest.approx(expected, rel=1e-9)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            heatmap_bce(torch.zeros(1, 4, 4), torch.zeros(1, 5, 5))

    def test_nan_rejected(self):
        bad = torch.full((1, 4, 4), float("nan"))
        with pytest.raises(ValueError):
            heatmap_bce(bad, torch.zeros(1, 4, 4))
