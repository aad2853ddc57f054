"""Orthonormal Haar transform of keyframe trajectories along the time axis.

Trajectories are ``(..., T, 3)`` arrays; any leading axes (typically one per
Gaussian) are carried through, and the three coordinates are transformed
independently.  Lengths that are not a multiple of ``2**levels`` are extended
by symmetric padding (edge sample repeated) and cut back after synthesis.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError

SQRT1_2 = np.sqrt(0.5)


@dataclass(frozen=True, eq=False)
class WaveletPyramid:
    """Approximation plus per-level details.

    ``details[0]`` is the finest level (length ``padded_length / 2``) and
    ``details[-1]`` the coarsest.  ``kept_levels`` counts how many of the
    coarsest detail levels still carry data; the rest are zero and are never
    serialized.
    """

    levels: int
    approx: np.ndarray
    details: tuple
    original_length: int
    kept_levels: int

    @property
    def padded_length(self):
        return self.approx.shape[-2] << self.levels

    @property
    def retained_count(self):
        """Stored coefficients per coordinate axis."""
        n = self.approx.shape[-2]
        for d in self.details[self.levels - self.kept_levels:]:
            n += d.shape[-2]
        return n

    @property
    def discarded_count(self):
        return self.padded_length - self.retained_count

    @property
    def retained_fraction(self):
        return self.retained_count / self.padded_length

    def coefficients(self):
        """Retained coefficients, coarse to fine, concatenated on the time axis."""
        parts = [self.approx] + [d for d in reversed(self.details[self.levels - self.kept_levels:])]
        return np.concatenate(parts, axis=-2)


def padded_length(length, levels):
    block = 1 << levels
    return -(-length // block) * block


def _pad(x, target):
    extra = target - x.shape[-2]
    if extra == 0:
        return x
    width = [(0, 0)] * x.ndim
    width[-2] = (0, extra)
    return np.pad(x, width, mode="symmetric")


def haar_forward(trajectory, levels=1) -> WaveletPyramid:
    x = np.asarray(trajectory, dtype=np.float64)
    if x.ndim < 2:
        raise ValidationError("trajectory must be at least 2-D (..., T, D)")
    if levels < 1:
        raise ValidationError("levels must be >= 1")
    n = x.shape[-2]
    if n < 2:
        raise ValidationError("trajectory needs at least two samples")
    a = _pad(x, padded_length(n, levels))
    details = []
    for _ in range(levels):
        even, odd = a[..., 0::2, :], a[..., 1::2, :]
        details.append((even - odd) * SQRT1_2)
        a = (even + odd) * SQRT1_2
    return WaveletPyramid(levels, a, tuple(details), n, levels)


def haar_inverse(pyramid: WaveletPyramid):
    a = np.asarray(pyramid.approx, dtype=np.float64)
    if len(pyramid.details) != pyramid.levels:
        raise ValidationError("pyramid detail count does not match its level count")
    for level in range(pyramid.levels - 1, -1, -1):
        d = np.asarray(pyramid.details[level], dtype=np.float64)
        if d.shape != a.shape:
            raise ValidationError(f"detail level {level + 1} has shape {d.shape}, "
                                  f"approximation has {a.shape}")
        out = np.empty(a.shape[:-2] + (2 * a.shape[-2], a.shape[-1]))
        out[..., 0::2, :] = (a + d) * SQRT1_2
        out[..., 1::2, :] = (a - d) * SQRT1_2
        a = out
    if pyramid.original_length > a.shape[-2]:
        raise ValidationError("original length exceeds reconstructed length")
    return a[..., :pyramid.original_length, :]


def mask_details(pyramid: WaveletPyramid, keep_levels=0) -> WaveletPyramid:
    """Zero every detail level except the ``keep_levels`` coarsest ones."""
    keep_levels = max(0, min(int(keep_levels), pyramid.kept_levels))
    drop = pyramid.levels - keep_levels
    details = tuple(np.zeros_like(d) if i < drop else d for i, d in enumerate(pyramid.details))
    return replace(pyramid, details=details, kept_levels=keep_levels)


def from_coefficients(coeffs, levels, original_length, kept_levels=0) -> WaveletPyramid:
    """Inverse of :meth:`WaveletPyramid.coefficients`; missing details become zero."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    total = padded_length(original_length, levels)
    n_a = total >> levels
    lead = coeffs.shape[:-2]
    dim = coeffs.shape[-1]
    approx = coeffs[..., :n_a, :]
    pos = n_a
    details = [None] * levels
    for level in range(levels - 1, -1, -1):
        size = total >> (level + 1)
        if level >= levels - kept_levels:
            details[level] = coeffs[..., pos:pos + size, :]
            pos += size
        else:
            details[level] = np.zeros(lead + (size, dim))
    if pos != coeffs.shape[-2]:
        raise ValidationError(f"expected {pos} coefficients, got {coeffs.shape[-2]}")
    return WaveletPyramid(levels, approx, tuple(details), original_length, kept_levels)


def haar_matrix(length, levels=1):
    """Analysis matrix ``W`` (rows: approximation then details coarse to fine).

    Built by pushing unit impulses through :func:`haar_forward`, so it is the
    transform actually applied.  ``length`` must be a multiple of ``2**levels``.
    """
    if length % (1 << levels):
        raise ValidationError("length must be a multiple of 2**levels")
    eye = np.eye(length)[:, :, None]
    pyr = haar_forward(eye, levels)
    parts = [pyr.approx] + list(reversed(pyr.details))
    return np.concatenate(parts, axis=-2)[..., 0].T
