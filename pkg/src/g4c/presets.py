"""Compression level presets and config-file overrides."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .errors import ValidationError
from .quant import CODEBOOK_SIZE, PHI_THRES, THETA_TH, QuantPolicy

LAMBDA_GS = (0.05, 0.02, 0.01, 0.005, 0.002, 0.0005)
LAMBDA_SH = (0.5, 0.2, 0.1, 0.05, 0.02, 0.005)
LEVELS = tuple(range(1, len(LAMBDA_GS) + 1))

DEFAULT_LAMBDA_R = 1.0
DEFAULT_VQ_WEIGHT = 0.02


@dataclass(frozen=True)
class LevelPreset:
    level: int = 0
    lambda_gs: float = 0.0
    lambda_sh: float = 0.0
    lambda_r: float = DEFAULT_LAMBDA_R
    wavelet_levels: int = 1  # 0 codes keyframes directly
    keep_levels: int = 0  # detail levels kept (0 = all discarded)
    codebook_size: int = CODEBOOK_SIZE
    vq_weight: float = DEFAULT_VQ_WEIGHT  # ECVQ rate weight, relative to sample spread
    ecvq_iters: int = 20
    traj_step: float = 1.0 / 16384  # trajectory quantizer step, relative to scene extent
    policy: QuantPolicy = field(default_factory=QuantPolicy)
    lambda_dssim: float = 0.2
    prune_grid: int = 64
    phi_thres: float = PHI_THRES
    theta_th: float = THETA_TH

    def __post_init__(self):
        if self.lambda_gs < 0 or self.lambda_sh < 0 or self.lambda_r < 0:
            raise ValidationError("lambdas must be non-negative")
        if not 0 <= self.wavelet_levels <= 8:
            raise ValidationError("wavelet levels must be in 0..8")
        if not 0 <= self.keep_levels <= max(self.wavelet_levels, 0):
            raise ValidationError("keep_levels must lie in 0..wavelet_levels")
        if self.codebook_size < 1:
            raise ValidationError("codebook size must be >= 1")
        if self.vq_weight < 0:
            raise ValidationError("vq_weight must be non-negative")
        if not self.traj_step > 0:
            raise ValidationError("trajectory step must be positive")
        if self.ecvq_iters < 1:
            raise ValidationError("ecvq_iters must be >= 1")

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def level_preset(level: int, **overrides) -> LevelPreset:
    if level not in LEVELS:
        raise ValidationError(f"level must be one of {LEVELS}")
    base = LevelPreset(level=level, lambda_gs=LAMBDA_GS[level - 1], lambda_sh=LAMBDA_SH[level - 1])
    return base.with_overrides(**overrides)


def _coerce(name, raw):
    types = {f.name: f.type for f in fields(LevelPreset)}
    kind = types[name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ValidationError(f"config value for {name!r} is not a {kind}: {raw!r}") from None
    return raw


def read_config(path) -> dict:
    """Overrides from the ``[preset]`` section of an INI-style file.

    Keys are :class:`LevelPreset` field names; ``quantize`` takes a
    comma-separated list of opacity attributes (``none`` for the empty list).
    """
    cp = configparser.ConfigParser()
    try:
        with open(path) as f:
            cp.read_file(f)
    except configparser.Error as exc:
        raise ValidationError(f"config file unreadable: {exc}") from None
    if not cp.has_section("preset"):
        raise ValidationError("config file needs a [preset] section")
    known = {f.name for f in fields(LevelPreset)} - {"policy"}
    out = {}
    for key, raw in cp.items("preset"):
        if key == "quantize":
            attrs = () if raw.strip().lower() == "none" else tuple(
                a.strip() for a in raw.split(",") if a.strip())
            out["policy"] = QuantPolicy(attrs)
        elif key in known:
            out[key] = _coerce(key, raw)
        else:
            raise ValidationError(f"unknown preset key {key!r}")
    return out
