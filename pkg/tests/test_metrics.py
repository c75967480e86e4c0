import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from skimage.metrics import structural_similarity

from evhdr import InvalidInputError
from evhdr.config import ToneMapConfig
from evhdr.metrics import (PSNR_CAP, average_gradient, mu_tonemap, psnr, psnr_mu, spatial_frequency,
                           ssim, ssim_mu)

FIXED = ToneMapConfig(normalize="fixed-1")


class TestToneMap:
    def test_endpoints(self):
        np.testing.assert_allclose(mu_tonemap(np.array([0.0, 1.0]), FIXED), [0.0, 1.0], atol=1e-15)

    def test_hand_value(self):
        assert mu_tonemap(np.array([0.0002]), FIXED)[0] == pytest.approx(math.log(2) / math.log(5001), abs=1e-12)
        assert mu_tonemap(np.array([0.0002]), FIXED)[0] == pytest.approx(0.08138, abs=1e-5)

    def test_strictly_monotone(self):
        x = np.sort(np.random.default_rng(0).uniform(0, 1, 1000))
        assert np.all(np.diff(mu_tonemap(x, FIXED)) > 0)

    def test_per_image_max_normalizes_peak(self):
        x = np.array([0.0, 2.0, 8.0])
        np.testing.assert_allclose(mu_tonemap(x), mu_tonemap(x / 8.0, FIXED))

    def test_negative_rejected(self):
        with pytest.raises(InvalidInputError):
            mu_tonemap(np.array([-1e-3]))


class TestPsnr:
    def test_identical_hits_cap(self):
        x = np.random.default_rng(0).uniform(0, 3, (8, 8, 3))
        assert psnr_mu(x, x) == PSNR_CAP

    def test_twenty_db(self):
        a = np.zeros((10, 10))
        assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)

    def test_zero_vs_one(self):
        assert psnr_mu(np.zeros((4, 4)), np.ones((4, 4)), FIXED) == pytest.approx(0.0, abs=1e-12)

    def test_decreases_with_noise(self):
        rng = np.random.default_rng(1)
        ref = rng.uniform(0, 1, (32, 32, 3))
        noise = rng.standard_normal(ref.shape)
        scores = [psnr_mu(np.clip(ref + s * noise, 0, None), ref, FIXED) for s in (0.01, 0.05, 0.1)]
        assert scores[0] > scores[1] > scores[2]

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            psnr_mu(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSsim:
    def test_identical(self):
        x = np.random.default_rng(0).uniform(0, 2, (20, 20, 3))
        assert ssim_mu(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_degradation_detected(self):
        x = np.random.default_rng(0).uniform(0, 1, (20, 20, 3))
        assert ssim_mu(np.clip(x + 0.5, 0, 1), x, FIXED) < 1.0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_reference_implementation(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(0, 1, (32, 40))
        b = np.clip(a + rng.normal(0, 0.1 * (seed + 1), a.shape), 0, 1)
        ref = structural_similarity(a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
                                    data_range=1.0)
        assert ssim(a, b) == pytest.approx(ref, abs=1e-4)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_range(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.uniform(0, 1, (2, 12, 12))
        assert -1.0 <= ssim(a, b) <= 1.0

    def test_too_small(self):
        with pytest.raises(InvalidInputError):
            ssim(np.zeros((10, 10)), np.zeros((10, 10)))


def brute_force_ag(img):
    h, w = img.shape
    total = 0.0
    for i in range(h - 1):
        for j in range(w - 1):
            dx = img[i, j + 1] - img[i, j]
            dy = img[i + 1, j] - img[i, j]
            total += math.sqrt((dx * dx + dy * dy) / 2.0)
    return total / ((h - 1) * (w - 1))


class TestNoReference:
    def test_constant_is_zero(self):
        img = np.full((6, 6, 3), 0.3)
        assert average_gradient(img) == 0.0
        assert spatial_frequency(img) == 0.0

    def test_ramp(self):
        s = 0.05
        img = np.tile(np.arange(10) * s, (7, 1))
        assert average_gradient(img) == pytest.approx(s / math.sqrt(2), abs=1e-12)

    def test_ag_matches_loop(self):
        img = np.random.default_rng(0).uniform(0, 1, (9, 13))
        assert average_gradient(img) == pytest.approx(brute_force_ag(img), abs=1e-9)

    def test_checkerboard(self):
        board = (np.indices((4, 4)).sum(axis=0) % 2).astype(float)
        assert spatial_frequency(board) == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_transpose_symmetry(self):
        img = np.random.default_rng(2).uniform(0, 1, (8, 11))
        assert spatial_frequency(img) == pytest.approx(spatial_frequency(img.T), abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), c=st.floats(-5, 5))
    def test_translation_invariance(self, seed, c):
        img = np.random.default_rng(seed).uniform(0, 1, (8, 8))
        assert average_gradient(img + c) == pytest.approx(average_gradient(img), abs=1e-9)
        assert spatial_frequency(img + c) == pytest.approx(spatial_frequency(img), abs=1e-9)
