"""Image and trajectory quality metrics."""
from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ValidationError

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak=1.0):
    """PSNR in dB; ``math.inf`` for identical inputs."""
    a, b = _same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def trajectory_psnr(original, reconstructed, extent):
    """PSNR of positions with the scene extent as peak value."""
    if not extent > 0:
        raise ValidationError("extent must be positive")
    return psnr(original, reconstructed, peak=extent)


def _gaussian_taps(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


_TAPS = _gaussian_taps()


def _blur(x, axes):
    # separable 11x11 Gaussian over the two image axes, symmetric boundary
    x = correlate1d(x, _TAPS, axis=axes[0], mode="reflect")
    return correlate1d(x, _TAPS, axis=axes[1], mode="reflect")


def ssim_map(a, b, data_range=1.0, axes=(0, 1)):
    """Per-pixel SSIM; ``axes`` names the image rows/columns (others are batch/channel)."""
    a, b = _same_shape(a, b)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a, mu_b = _blur(a, axes), _blur(b, axes)
    var_a = _blur(a * a, axes) - mu_a * mu_a
    var_b = _blur(b * b, axes) - mu_b * mu_b
    cov = _blur(a * b, axes) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, data_range=1.0, axes=(0, 1)):
    """Mean SSIM over pixels (and channels, for ``H x W x C`` images)."""
    return float(np.mean(ssim_map(a, b, data_range, axes)))


def distortion_loss(rendered, truth, lambda_dssim=0.2, axes=(0, 1)):
    """``(1 - l) * L1 + l * (1 - SSIM)``.

    For a stack of equally sized images pass ``axes=(1, 2)``; the result is
    then the mean of the per-image losses.
    """
    rendered, truth = _same_shape(rendered, truth)
    l1 = float(np.mean(np.abs(rendered - truth)))
    if lambda_dssim == 0:
        return l1
    return (1.0 - lambda_dssim) * l1 + lambda_dssim * (1.0 - ssim(rendered, truth, axes=axes))
