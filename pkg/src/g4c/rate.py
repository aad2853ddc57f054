"""Objective terms: distortion, rate, regularisation and their composition."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .metrics import distortion_loss
from .model import GaussianScene, quat_conjugate, quat_log, quat_multiply

__all__ = ["LossBreakdown", "distortion_loss", "entropy_loss", "vq_loss", "reg_loss",
           "total_loss"]


@dataclass(frozen=True)
class LossBreakdown:
    l_dist: float
    l_rate: float
    l_reg: float
    l_total: float
    l_gs: float
    l_sh: float
    l_entropy: float
    l_vq: float
    lambda_r: float
    lambda_reg: float
    lambda_dssim: float
    lambda_gs: float
    lambda_sh: float

    def as_row(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _stream_items(streams, codebooks):
    for key, idx in streams.items():
        if key not in codebooks:
            raise ValidationError(f"no codebook for stream {key!r}")
        idx = np.asarray(idx, dtype=np.int64).ravel()
        cb = codebooks[key]
        if idx.size and (idx.min() < 0 or idx.max() >= len(cb)):
            raise ValidationError(f"stream {key!r} indexes outside its codebook")
        yield key, idx, cb


def _default_n(streams):
    return max((np.asarray(v).size for v in streams.values()), default=0)


def entropy_loss(streams, codebooks, divisors=None, n=None) -> float:
    """Mean codeword rate ``-log2 p`` over all streams, each divided by its weight.

    ``streams`` and ``codebooks`` are dicts keyed by ``(attribute, component)``;
    ``divisors`` maps the same keys to the per-group weights (default 1).
    ``n`` defaults to the longest stream.
    """
    divisors = divisors or {}
    n = _default_n(streams) if n is None else n
    if n == 0:
        return 0.0
    total = 0.0
    for key, idx, cb in _stream_items(streams, codebooks):
        total += float(np.sum(cb.rates[idx])) / divisors.get(key, 1.0)
    return total / n


def vq_loss(samples, assignments, codebooks, n=None) -> float:
    """Mean squared distance between samples and their assigned codewords."""
    n = _default_n(assignments) if n is None else n
    if n == 0:
        return 0.0
    total = 0.0
    for key, idx, cb in _stream_items(assignments, codebooks):
        x = np.asarray(samples[key], dtype=np.float64)
        x = x.reshape(x.shape[0], -1) if x.ndim else x.reshape(1, 1)
        if x.shape[0] != idx.size or x.shape[1] != cb.dim:
            raise ValidationError(f"samples of {key!r} do not align with their indices")
        total += float(np.sum((x - cb.codewords[idx]) ** 2))
    return total / n


def reg_loss(scene: GaussianScene) -> float:
    """Displacement magnitude plus keyframe smoothness penalties."""
    out = 0.0
    if len(scene.statics):
        out += float(np.mean(np.sum(scene.statics.disp ** 2, axis=1)))
    d = scene.dynamics
    if len(d) and d.n_keyframes >= 3:
        p = d.positions
        acc = p[:, 2:] - 2 * p[:, 1:-1] + p[:, :-2]
        out += float(np.mean(np.sum(acc ** 2, axis=-1)))
        q = d.rotations
        omega = quat_log(quat_multiply(quat_conjugate(q[:, :-1]), q[:, 1:]))
        out += float(np.mean(np.sum((omega[:, 1:] - omega[:, :-1]) ** 2, axis=-1)))
    return out


def total_loss(l_dist, l_gs=0.0, l_sh=0.0, l_entropy=0.0, l_vq=0.0, l_reg=0.0, *,
               lambda_r=1.0, lambda_reg=0.0, lambda_gs=0.0, lambda_sh=0.0,
               lambda_dssim=0.2) -> LossBreakdown:
    """Compose the rate term and the total objective from measured parts."""
    terms = dict(l_dist=l_dist, l_gs=l_gs, l_sh=l_sh, l_entropy=l_entropy, l_vq=l_vq,
                 l_reg=l_reg, lambda_r=lambda_r, lambda_reg=lambda_reg, lambda_gs=lambda_gs,
                 lambda_sh=lambda_sh, lambda_dssim=lambda_dssim)
    for name, v in terms.items():
        if not math.isfinite(v):
            raise ValidationError(f"{name} is not finite")
    l_rate = lambda_gs * l_gs + lambda_sh * l_sh + l_entropy + l_vq
    l_total = l_dist + lambda_r * l_rate + lambda_reg * l_reg
    return LossBreakdown(l_dist=l_dist, l_rate=l_rate, l_reg=l_reg, l_total=l_total, l_gs=l_gs,
                         l_sh=l_sh, l_entropy=l_entropy, l_vq=l_vq, lambda_r=lambda_r,
                         lambda_reg=lambda_reg, lambda_dssim=lambda_dssim, lambda_gs=lambda_gs,
                         lambda_sh=lambda_sh)
