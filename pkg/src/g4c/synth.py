"""Deterministic synthetic dynamic scenes with known smooth motion.

Statics are surface splats on a floor, a back wall and a few blobs, with
smooth position-dependent colour, plus faint floaters that pruning should
find.  Dynamics come in two classes: slow orbits that are visible for the
whole clip, and short appear/disappear events with sharp temporal edges.
All parameters are rounded through float32, so the scene survives the
interchange file unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ValidationError
from .model import (DynamicGaussians, GaussianScene, StaticGaussians, axis_angle_quat,
                    keyframe_count, quat_multiply, sh_count)
from .render import SH_C0, ProbeSet

BAND_STD = (0.0, 0.10, 0.05, 0.025)  # per-degree SH amplitude


@dataclass(frozen=True)
class SynthConfig:
    n_static: int = 2000
    n_dynamic: int = 500
    n_frames: int = 64
    keyframe_interval: int = 2
    sh_degree: int = 3
    floater_fraction: float = 0.25
    moving_fraction: float = 0.1
    event_fraction: float = 0.3
    orbit_step: float = 0.01  # world units travelled per keyframe interval
    image_size: int = 64
    n_views: int = 8
    n_times: int = 4

    def __post_init__(self):
        if self.n_static < 0 or self.n_dynamic < 0:
            raise ValidationError("Gaussian counts must be non-negative")
        if self.n_frames < 2:
            raise ValidationError("need at least two frames")
        if self.keyframe_interval < 1:
            raise ValidationError("keyframe interval must be >= 1")
        if not 0 <= self.sh_degree <= 3:
            raise ValidationError("sh degree must be in [0, 3]")
        for name in ("floater_fraction", "moving_fraction", "event_fraction"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.orbit_step < 0:
            raise ValidationError("orbit_step must be non-negative")

    @classmethod
    def from_mapping(cls, values):
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValidationError(f"unknown generator setting {key!r}")
            kwargs[key] = (float if known[key] == "float" else int)(raw)
        return cls(**kwargs)


STANDARD = SynthConfig()
STANDARD_SEED = 42
#: dynamics-heavy scene of slow orbits only, for judging trajectory coding
SMOOTH_ORBIT = SynthConfig(n_static=1000, n_dynamic=1000, event_fraction=0.0, orbit_step=0.0015)


def _f32(a):
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def _random_quats(rng, n):
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return np.where(q[:, :1] < 0, -q, q)


def _flat_quats(normals):
    """Rotations taking +z to each normal (so a flat splat lies on the surface)."""
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(z, normals)
    s = np.linalg.norm(axis, axis=1)
    angle = np.arctan2(s, normals @ z)
    axis = np.where(s[:, None] > 1e-9, axis / np.maximum(s, 1e-12)[:, None], [1.0, 0.0, 0.0])
    return axis_angle_quat(axis, angle)


def _color_field(p, phase):
    r = 0.5 + 0.35 * np.sin(2.1 * p[:, 0] + phase[0])
    g = 0.5 + 0.35 * np.sin(1.7 * p[:, 1] + 0.8 * p[:, 2] + phase[1])
    b = 0.5 + 0.35 * np.cos(1.3 * p[:, 2] - 0.9 * p[:, 0] + phase[2])
    return np.stack([r, g, b], axis=1)


def _sh_from_colors(rng, colors, degree):
    k = sh_count(degree)
    sh = np.zeros((len(colors), k, 3))
    sh[:, 0] = (colors - 0.5) / SH_C0
    for level in range(1, degree + 1):
        sl = slice(level * level, (level + 1) ** 2)
        sh[:, sl] = rng.normal(0.0, BAND_STD[level], size=(len(colors), 2 * level + 1, 3))
    return sh


def _surface_points(rng, n):
    """Points and normals on a floor, a back wall and three ellipsoidal blobs."""
    kind = rng.choice(3, size=n, p=[0.4, 0.25, 0.35])
    pts = np.zeros((n, 3))
    nrm = np.zeros((n, 3))
    floor = kind == 0
    pts[floor] = np.column_stack([rng.uniform(-1, 1, floor.sum()), rng.uniform(-1, 1, floor.sum()),
                                  np.full(floor.sum(), -0.9)])
    nrm[floor] = [0, 0, 1]
    wall = kind == 1
    pts[wall] = np.column_stack([np.full(wall.sum(), -0.95), rng.uniform(-1, 1, wall.sum()),
                                 rng.uniform(-0.9, 0.6, wall.sum())])
    nrm[wall] = [1, 0, 0]
    blob = kind == 2
    centers = np.array([[0.3, 0.3, -0.5], [-0.3, -0.4, -0.4], [0.4, -0.5, -0.6]])
    radii = np.array([[0.3, 0.25, 0.35], [0.25, 0.3, 0.45], [0.2, 0.2, 0.25]])
    which = rng.integers(0, 3, blob.sum())
    d = rng.normal(size=(blob.sum(), 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    pts[blob] = centers[which] + d * radii[which]
    n_b = d / radii[which]
    nrm[blob] = n_b / np.linalg.norm(n_b, axis=1, keepdims=True)
    return pts, nrm


def _statics(rng, cfg: SynthConfig):
    n = cfg.n_static
    n_float = int(round(n * cfg.floater_fraction))
    n_surf = n - n_float
    pts, nrm = _surface_points(rng, n_surf)
    rot_s = _flat_quats(nrm)
    ls_s = np.log(np.column_stack([rng.uniform(0.03, 0.07, (n_surf, 2)),
                                   rng.uniform(0.005, 0.012, n_surf)]))
    op_s = rng.uniform(0.6, 1.0, n_surf)
    col_s = _color_field(pts, (0.0, 1.0, 2.0))

    flo = rng.uniform(-1, 1, (n_float, 3))
    rot_f = _random_quats(rng, n_float)
    ls_f = np.log(rng.uniform(0.005, 0.015, (n_float, 3)))
    op_f = rng.uniform(0.01, 0.05, n_float)
    col_f = rng.uniform(0.1, 0.9, (n_float, 3))

    pivot = np.concatenate([pts, flo])
    disp = np.zeros((n, 3))
    moving = rng.random(n) < cfg.moving_fraction
    disp[moving] = rng.normal(0.0, 0.02, (moving.sum(), 3))
    rot = np.concatenate([rot_s, rot_f])
    sh = _sh_from_colors(rng, np.concatenate([col_s, col_f]), cfg.sh_degree)
    return StaticGaussians(_f32(pivot), _f32(disp), _f32(np.concatenate([ls_s, ls_f])),
                           _f32(rot), _f32(np.concatenate([op_s, op_f])), _f32(sh))


def _dynamics(rng, cfg: SynthConfig, duration, n_keys):
    n = cfg.n_dynamic
    times = np.arange(n_keys) * cfg.keyframe_interval
    event = rng.random(n) < cfg.event_fraction
    center = rng.uniform(-0.6, 0.6, (n, 3))
    center[:, 2] = rng.uniform(-0.6, 0.3, n)
    radius = rng.uniform(0.05, 0.18, n)
    speed = cfg.orbit_step / cfg.keyframe_interval
    omega = speed / radius * rng.choice([-1.0, 1.0], n)
    phase = rng.uniform(0, 2 * np.pi, n)
    bob = rng.uniform(0.0, 0.03, n)
    ang = phase[:, None] + omega[:, None] * times[None, :]
    pos = np.stack([center[:, 0:1] + radius[:, None] * np.cos(ang),
                    center[:, 1:2] + radius[:, None] * np.sin(ang),
                    center[:, 2:3] + bob[:, None] * np.sin(0.5 * ang)], axis=-1)

    axis = rng.normal(size=(n, 3))
    spin = rng.uniform(0.005, 0.03, n)
    q0 = _random_quats(rng, n)
    dq = axis_angle_quat(np.repeat(axis[:, None], n_keys, 1), spin[:, None] * times[None, :])
    rots = quat_multiply(dq, q0[:, None, :])
    rots /= np.linalg.norm(rots, axis=-1, keepdims=True)

    log_scale = np.log(rng.uniform(0.03, 0.07, (n, 3)))
    opacity = rng.uniform(0.7, 1.0, n)
    centers = np.column_stack([rng.uniform(-6, 0, n), rng.uniform(duration, duration + 6, n)])
    variances = rng.uniform(20.0, 100.0, (n, 2))
    lo = min(4.0, 0.1 * duration)
    start = rng.uniform(lo, max(duration - 24, lo + 0.5 * duration), n)
    centers[event] = np.column_stack([start, start + rng.uniform(3, 15, n)])[event]
    variances[event] = rng.uniform(0.5, 3.0, (n, 2))[event]
    colors = rng.uniform(0.15, 0.95, (n, 3))
    sh = _sh_from_colors(rng, colors, cfg.sh_degree)
    return DynamicGaussians(_f32(pos), _f32(rots), _f32(log_scale), _f32(opacity),
                            _f32(centers), _f32(variances), _f32(sh))


def generate_synthetic_scene(config: SynthConfig = STANDARD, seed=STANDARD_SEED, probes=True):
    """``(scene, probe_set)``; the probe set holds ground-truth frames of the scene.

    ``probes=False`` skips rendering and returns ``(scene, None)``.
    """
    if not isinstance(config, SynthConfig):
        raise ValidationError("config must be a SynthConfig")
    rng = np.random.default_rng(seed)
    duration = float(config.n_frames - 1)
    n_keys = keyframe_count(duration, config.keyframe_interval)
    statics = _statics(rng, config)
    if config.n_dynamic:
        dynamics = _dynamics(rng, config, duration, n_keys)
    else:
        dynamics = DynamicGaussians.empty(config.sh_degree, n_keys)
    scene = GaussianScene(statics, dynamics, duration, config.keyframe_interval,
                          tuple(float(t) for t in range(config.n_frames)), config.sh_degree)
    if not probes:
        return scene, None
    return scene, ProbeSet.standard(scene, seed=seed, n_views=config.n_views,
                                    n_times=config.n_times, size=config.image_size)


def standard_scene(probes=True):
    return generate_synthetic_scene(STANDARD, STANDARD_SEED, probes)


def smooth_orbit_scene(seed=STANDARD_SEED, probes=True):
    return generate_synthetic_scene(SMOOTH_ORBIT, seed, probes)


def random_scene(rng, max_static=12, max_dynamic=6, sh_degree=None):
    """Small unstructured scene for property tests (not float32-rounded)."""
    k = int(rng.integers(0, 4)) if sh_degree is None else sh_degree
    ns = int(rng.integers(0, max_static + 1))
    nd = int(rng.integers(0, max_dynamic + 1))
    interval = int(rng.integers(1, 4))
    duration = float(rng.integers(2, 12))
    n_keys = keyframe_count(duration, interval)
    kk = sh_count(k)
    statics = StaticGaussians(rng.uniform(-1, 1, (ns, 3)), rng.normal(0, 0.05, (ns, 3)),
                              np.log(rng.uniform(0.02, 0.2, (ns, 3))), _random_quats(rng, ns),
                              rng.uniform(0, 1, ns), rng.normal(0, 0.5, (ns, kk, 3)))
    if nd:
        a = np.sort(rng.uniform(-2, duration + 2, (nd, 2)), axis=1)
        rots = _random_quats(rng, nd * n_keys).reshape(nd, n_keys, 4)
        dynamics = DynamicGaussians(rng.uniform(-1, 1, (nd, n_keys, 3)), rots,
                                    np.log(rng.uniform(0.02, 0.2, (nd, 3))), rng.uniform(0, 1, nd),
                                    a, rng.uniform(0.3, 40.0, (nd, 2)),
                                    rng.normal(0, 0.5, (nd, kk, 3)))
    else:
        dynamics = DynamicGaussians.empty(k, n_keys)
    times = tuple(np.linspace(0, duration, int(rng.integers(2, 9))))
    return GaussianScene(statics, dynamics, duration, interval, times, k)
