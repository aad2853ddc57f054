import math

import numpy as np
import pytest
from skimage.metrics import structural_similarity

from g4c.errors import ValidationError
from g4c.metrics import distortion_loss, psnr, ssim, ssim_map, trajectory_psnr


def _oracle_map(a, b):
    _, full = structural_similarity(a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                    use_sample_covariance=False, full=True,
                                    channel_axis=2 if a.ndim == 3 else None)
    return full


class TestSsim:
    def test_matches_reference_map(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(size=(40, 36, 3))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        np.testing.assert_allclose(ssim_map(a, b), _oracle_map(a, b), atol=1e-10)

    def test_grey_images(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(size=(32, 32))
        b = np.clip(a * 0.8 + 0.1, 0, 1)
        np.testing.assert_allclose(ssim_map(a, b), _oracle_map(a, b), atol=1e-10)

    def test_constant_images_closed_form(self):
        # no variance: SSIM reduces to the luminance term
        a = np.full((20, 20), 0.3)
        b = np.full((20, 20), 0.4)
        c1 = 0.01 ** 2
        expect = (2 * 0.3 * 0.4 + c1) / (0.3 ** 2 + 0.4 ** 2 + c1)
        assert ssim(a, b) == pytest.approx(expect, rel=1e-12)

    def test_identical_is_one(self):
        a = np.random.default_rng(2).uniform(size=(16, 16, 3))
        assert ssim(a, a) == pytest.approx(1.0)

    def test_stacked_axes(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(size=(4, 24, 24, 3))
        b = rng.uniform(size=(4, 24, 24, 3))
        per_image = [ssim(a[i], b[i]) for i in range(4)]
        assert ssim(a, b, axes=(1, 2)) == pytest.approx(np.mean(per_image), rel=1e-12)


class TestDistortion:
    def test_identical_is_zero(self):
        a = np.random.default_rng(4).uniform(size=(16, 16, 3))
        assert distortion_loss(a, a) == pytest.approx(0.0, abs=1e-15)

    def test_pure_l1(self):
        assert distortion_loss(np.full((8, 8, 3), 0.5), np.zeros((8, 8, 3)), 0.0) == 0.5

    def test_constant_images(self):
        a, b = np.full((16, 16, 3), 0.6), np.full((16, 16, 3), 0.5)
        s = _oracle_map(a, b).mean()
        assert distortion_loss(a, b, 0.2) == pytest.approx(0.8 * 0.1 + 0.2 * (1 - s), rel=1e-12)

    @pytest.mark.parametrize("lam", [0.0, 1.0])
    def test_symmetric(self, lam):
        rng = np.random.default_rng(5)
        a, b = rng.uniform(size=(2, 20, 20, 3))
        assert distortion_loss(a, b, lam) == pytest.approx(distortion_loss(b, a, lam), rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            distortion_loss(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


class TestPsnr:
    def test_identical_is_infinite(self):
        a = np.ones((4, 4))
        assert psnr(a, a) == math.inf

    def test_known_value(self):
        a = np.zeros((10, 10))
        b = np.full((10, 10), 0.1)
        assert psnr(a, b) == pytest.approx(20.0)

    def test_trajectory_uses_extent(self):
        a = np.zeros((3, 5, 3))
        b = np.full((3, 5, 3), 0.01)
        assert trajectory_psnr(a, b, 2.0) == pytest.approx(10 * math.log10(4 / 1e-4))

    def test_bad_extent(self):
        with pytest.raises(ValidationError):
            trajectory_psnr(np.zeros(3), np.zeros(3), 0.0)
