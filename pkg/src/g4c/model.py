"""Static/dynamic Gaussian scene representation and time interpolation.

Gaussians are stored as struct-of-arrays sets: one ``StaticGaussians`` and one
``DynamicGaussians`` per scene, each field carrying a leading Gaussian axis.
Every evaluation function broadcasts over that axis, so a set of size one is
the single-Gaussian case.

Quaternions are ``(w, x, y, z)``.  Scales are kept as natural logs and
exponentiated where a covariance is needed.
"""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError

QUAT_TOL = 1e-6


def sh_count(degree: int) -> int:
    return (degree + 1) ** 2


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _check_unit(q, what):
    if q.size == 0:
        return
    norms = np.linalg.norm(q, axis=-1)
    bad = np.abs(norms - 1.0) > QUAT_TOL
    if np.any(bad):
        raise ValidationError(f"{what}: {int(bad.sum())} quaternion(s) not unit norm "
                              f"(worst |q|={norms.flat[np.argmax(np.abs(norms - 1.0))]:.9g})")


@dataclass(frozen=True, eq=False)
class StaticGaussians:
    """Gaussians with constant shape/colour whose centre moves linearly."""

    pivot: np.ndarray  # (N, 3)
    disp: np.ndarray  # (N, 3)
    log_scale: np.ndarray  # (N, 3)
    rotation: np.ndarray  # (N, 4)
    opacity: np.ndarray  # (N,)
    sh: np.ndarray  # (N, K, 3)

    def __post_init__(self):
        for name in ("pivot", "disp", "log_scale", "rotation", "opacity", "sh"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = self.pivot.shape[0]
        expect = {"pivot": (n, 3), "disp": (n, 3), "log_scale": (n, 3),
                  "rotation": (n, 4), "opacity": (n,)}
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise ValidationError(f"static {name} has shape {getattr(self, name).shape}, "
                                      f"expected {shape}")
        if self.sh.ndim != 3 or self.sh.shape[0] != n or self.sh.shape[2] != 3:
            raise ValidationError(f"static sh has shape {self.sh.shape}")
        _check_unit(self.rotation, "static rotation")
        if n and (self.opacity.min() < 0 or self.opacity.max() > 1):
            raise ValidationError("static opacity outside [0, 1]")

    def __len__(self):
        return self.pivot.shape[0]

    @property
    def scale(self):
        return np.exp(self.log_scale)

    def subset(self, index):
        return StaticGaussians(self.pivot[index], self.disp[index], self.log_scale[index],
                               self.rotation[index], self.opacity[index], self.sh[index])

    @classmethod
    def empty(cls, sh_degree):
        k = sh_count(sh_degree)
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 4)),
                   np.zeros(0), np.zeros((0, k, 3)))


@dataclass(frozen=True, eq=False)
class DynamicGaussians:
    """Gaussians with keyframed position/rotation and a temporal opacity window.

    ``centers`` holds ``(a_s, a_f)``, the start and end of the fully visible
    plateau; ``variances`` holds ``(b_s, b_f)``, the widths of the fade-in and
    fade-out edges.  All four are in time units.
    """

    positions: np.ndarray  # (N, Tk, 3)
    rotations: np.ndarray  # (N, Tk, 4)
    log_scale: np.ndarray  # (N, 3)
    opacity: np.ndarray  # (N,) base opacity
    centers: np.ndarray  # (N, 2)
    variances: np.ndarray  # (N, 2)
    sh: np.ndarray  # (N, K, 3)

    def __post_init__(self):
        for name in ("positions", "rotations", "log_scale", "opacity", "centers",
                     "variances", "sh"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = self.positions.shape[0]
        if self.positions.ndim != 3 or self.positions.shape[2] != 3:
            raise ValidationError(f"dynamic positions have shape {self.positions.shape}")
        tk = self.positions.shape[1]
        expect = {"rotations": (n, tk, 4), "log_scale": (n, 3), "opacity": (n,),
                  "centers": (n, 2), "variances": (n, 2)}
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise ValidationError(f"dynamic {name} has shape {getattr(self, name).shape}, "
                                      f"expected {shape}")
        if self.sh.ndim != 3 or self.sh.shape[0] != n or self.sh.shape[2] != 3:
            raise ValidationError(f"dynamic sh has shape {self.sh.shape}")
        _check_unit(self.rotations, "dynamic keyframe rotation")
        if n:
            if self.opacity.min() < 0 or self.opacity.max() > 1:
                raise ValidationError("dynamic base opacity outside [0, 1]")
            if np.any(self.centers[:, 0] > self.centers[:, 1]):
                raise ValidationError("temporal centre a_s exceeds a_f")
            if np.any(self.variances <= 0):
                raise ValidationError("temporal variances must be positive")

    def __len__(self):
        return self.positions.shape[0]

    @property
    def n_keyframes(self):
        return self.positions.shape[1]

    @property
    def scale(self):
        return np.exp(self.log_scale)

    def subset(self, index):
        return DynamicGaussians(self.positions[index], self.rotations[index],
                                self.log_scale[index], self.opacity[index],
                                self.centers[index], self.variances[index], self.sh[index])

    @classmethod
    def empty(cls, sh_degree, n_keyframes):
        k = sh_count(sh_degree)
        return cls(np.zeros((0, n_keyframes, 3)), np.zeros((0, n_keyframes, 4)),
                   np.zeros((0, 3)), np.zeros(0), np.zeros((0, 2)), np.ones((0, 2)),
                   np.zeros((0, k, 3)))


def keyframe_count(duration: float, interval: int) -> int:
    """Smallest uniform keyframe grid ``0, I, 2I, ...`` reaching ``duration``."""
    return int(math.ceil(duration / interval - 1e-12)) + 1


@dataclass(frozen=True, eq=False)
class GaussianScene:
    statics: StaticGaussians
    dynamics: DynamicGaussians
    duration: float
    keyframe_interval: int
    timestamps: tuple = field(default=())
    sh_degree: int = 3

    def __post_init__(self):
        object.__setattr__(self, "timestamps", tuple(float(t) for t in self.timestamps))
        if not self.duration > 0:
            raise ValidationError("duration must be positive")
        if int(self.keyframe_interval) != self.keyframe_interval or self.keyframe_interval < 1:
            raise ValidationError("keyframe interval must be a positive integer")
        object.__setattr__(self, "keyframe_interval", int(self.keyframe_interval))
        if not 0 <= self.sh_degree <= 3:
            raise ValidationError("sh degree must be in [0, 3]")
        if list(self.timestamps) != sorted(self.timestamps):
            raise ValidationError("timestamps must be ordered")
        k = sh_count(self.sh_degree)
        if self.statics.sh.shape[1] != k or self.dynamics.sh.shape[1] != k:
            raise ValidationError(f"sh coefficient count must be {k} for degree {self.sh_degree}")
        if self.dynamics.n_keyframes != self.n_keyframes:
            raise ValidationError(f"dynamics carry {self.dynamics.n_keyframes} keyframes, "
                                  f"scene needs {self.n_keyframes}")

    @property
    def n_keyframes(self):
        return keyframe_count(self.duration, self.keyframe_interval)

    @property
    def keyframe_times(self):
        return np.arange(self.n_keyframes, dtype=np.float64) * self.keyframe_interval

    @property
    def n_gaussians(self):
        return len(self.statics) + len(self.dynamics)

    def extent(self):
        pts = [self.statics.pivot, self.statics.pivot + self.statics.disp,
               self.dynamics.positions.reshape(-1, 3)]
        pts = np.concatenate(pts, axis=0)
        if len(pts) == 0:
            return 1.0
        return float(max(np.ptp(pts, axis=0).max(), 1e-9))

    def with_gaussians(self, statics=None, dynamics=None):
        return replace(self, statics=self.statics if statics is None else statics,
                       dynamics=self.dynamics if dynamics is None else dynamics)


def scene_digest(scene: GaussianScene) -> str:
    """SHA-256 over header values and every parameter array (float64, little-endian)."""
    h = hashlib.sha256()
    header = (len(scene.statics), len(scene.dynamics), scene.duration,
              scene.keyframe_interval, scene.sh_degree, scene.timestamps)
    h.update(repr(header).encode())
    s, d = scene.statics, scene.dynamics
    for a in (s.pivot, s.disp, s.log_scale, s.rotation, s.opacity, s.sh,
              d.positions, d.rotations, d.log_scale, d.opacity, d.centers, d.variances, d.sh):
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return h.hexdigest()


def scenes_equal(a: GaussianScene, b: GaussianScene) -> bool:
    """Field-for-field bitwise equality."""
    return scene_digest(a) == scene_digest(b)


# ---------------------------------------------------------------------------
# rotation / covariance

def quat_to_rotmat(q):
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    r = np.empty(q.shape[:-1] + (3, 3))
    r[..., 0, 0] = 1 - 2 * (y * y + z * z)
    r[..., 0, 1] = 2 * (x * y - w * z)
    r[..., 0, 2] = 2 * (x * z + w * y)
    r[..., 1, 0] = 2 * (x * y + w * z)
    r[..., 1, 1] = 1 - 2 * (x * x + z * z)
    r[..., 1, 2] = 2 * (y * z - w * x)
    r[..., 2, 0] = 2 * (x * z - w * y)
    r[..., 2, 1] = 2 * (y * z + w * x)
    r[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return r


def axis_angle_quat(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, dtype=np.float64)[..., None]
    return np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)


def quat_multiply(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([aw * bw - ax * bx - ay * by - az * bz,
                     aw * bx + ax * bw + ay * bz - az * by,
                     aw * by - ax * bz + ay * bw + az * bx,
                     aw * bz + ax * by - ay * bx + az * bw], axis=-1)


def quat_conjugate(q):
    q = np.array(q, dtype=np.float64)
    q[..., 1:] *= -1
    return q


def quat_log(q):
    """Rotation vector (axis * angle) of unit quaternions, shortest arc."""
    q = np.array(q, dtype=np.float64)
    q = np.where(q[..., :1] < 0, -q, q)
    v = q[..., 1:]
    s = np.linalg.norm(v, axis=-1)
    angle = 2.0 * np.arctan2(s, q[..., 0])
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(s > 1e-12, angle / np.where(s > 1e-12, s, 1.0), 2.0)
    return v * k[..., None]


def covariance_of(scale, q):
    """``R S S^T R^T`` for scale vectors ``(..., 3)`` and unit quaternions ``(..., 4)``."""
    scale = np.asarray(scale, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    _check_unit(q, "covariance_of")
    if np.any(scale <= 0):
        raise ValidationError("scale components must be positive")
    r = quat_to_rotmat(q)
    rs = r * scale[..., None, :]
    return rs @ np.swapaxes(rs, -1, -2)


# ---------------------------------------------------------------------------
# time evaluation

def _check_time(t, upper):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or np.any(t > upper):
        raise ValidationError(f"time {t} outside [0, {upper}]")
    return t


def static_position_at(g: StaticGaussians, t, duration):
    if not duration > 0:
        raise ValidationError("duration must be positive")
    t = _check_time(t, duration)
    return g.pivot + (t / duration) * g.disp


def _segment(t, interval, n_keys):
    """Bracketing keyframe index and local fraction for time ``t``."""
    if n_keys < 2:
        raise ValidationError("interpolation needs at least two keyframes")
    x = float(t) / interval
    n = min(int(math.floor(x)), n_keys - 2)
    return n, x - n


def hermite_tangents(keys):
    """Per-keyframe tangents (per keyframe step): central differences, one-sided at the ends."""
    keys = np.asarray(keys, dtype=np.float64)
    m = np.empty_like(keys)
    m[..., 1:-1, :] = 0.5 * (keys[..., 2:, :] - keys[..., :-2, :])
    m[..., 0, :] = keys[..., 1, :] - keys[..., 0, :]
    m[..., -1, :] = keys[..., -1, :] - keys[..., -2, :]
    return m


def hermite_interpolate(keys, t, interval):
    """Cubic Hermite interpolation of ``keys (..., Tk, D)`` sampled every ``interval``."""
    keys = np.asarray(keys, dtype=np.float64)
    n, u = _segment(t, interval, keys.shape[-2])
    m = hermite_tangents(keys)
    u2, u3 = u * u, u * u * u
    h00 = 2 * u3 - 3 * u2 + 1
    h10 = u3 - 2 * u2 + u
    h01 = -2 * u3 + 3 * u2
    h11 = u3 - u2
    out = (h00 * keys[..., n, :] + h10 * m[..., n, :]
           + h01 * keys[..., n + 1, :] + h11 * m[..., n + 1, :])
    if u == 0.0:
        out = keys[..., n, :].copy()
    elif u == 1.0:
        out = keys[..., n + 1, :].copy()
    return out


def slerp(q0, q1, u):
    """Shortest-arc spherical interpolation between unit quaternions."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.array(q1, dtype=np.float64)
    dot = np.sum(q0 * q1, axis=-1, keepdims=True)
    if np.any(dot < -1.0 + 1e-9):
        warnings.warn("antipodal quaternion pair in slerp; using first endpoint",
                      RuntimeWarning, stacklevel=2)
    q1 = np.where(dot < 0, -q1, q1)
    dot = np.abs(dot)
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    sin_t = np.sin(theta)
    near = sin_t < 1e-9
    safe = np.where(near, 1.0, sin_t)
    w0 = np.where(near, 1.0 - u, np.sin((1.0 - u) * theta) / safe)
    w1 = np.where(near, u, np.sin(u * theta) / safe)
    out = w0 * q0 + w1 * q1
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def dynamic_position_at(g: DynamicGaussians, t, scene: GaussianScene):
    t = _check_time(t, scene.duration)
    return hermite_interpolate(g.positions, t, scene.keyframe_interval)


def dynamic_rotation_at(g: DynamicGaussians, t, scene: GaussianScene):
    t = _check_time(t, scene.duration)
    n, u = _segment(t, scene.keyframe_interval, g.rotations.shape[-2])
    return slerp(g.rotations[..., n, :], g.rotations[..., n + 1, :], u)


def temporal_opacity(t, centers, variances):
    """Plateau of 1 on ``[a_s, a_f]`` with Gaussian fade edges of width ``b_s``/``b_f``."""
    centers = np.asarray(centers, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    if np.any(variances <= 0):
        raise ValidationError("temporal variances must be positive")
    t = np.asarray(t, dtype=np.float64)
    a_s, a_f = centers[..., 0], centers[..., 1]
    b_s, b_f = variances[..., 0], variances[..., 1]
    before = np.exp(-((t - a_s) ** 2) / (2.0 * b_s ** 2))
    after = np.exp(-((t - a_f) ** 2) / (2.0 * b_f ** 2))
    return np.where(t < a_s, before, np.where(t > a_f, after, 1.0))


def temporal_opacity_at(g: DynamicGaussians, t):
    return temporal_opacity(t, g.centers, g.variances)


def evaluate_at(scene: GaussianScene, t):
    """All Gaussians of ``scene`` at time ``t`` as flat arrays, statics first.

    Returns ``(means, scales, rotations, opacities, sh)``; dynamic opacity is
    already multiplied by its temporal window.
    """
    s, d = scene.statics, scene.dynamics
    means = [static_position_at(s, t, scene.duration)]
    rots = [s.rotation]
    if len(d):
        means.append(dynamic_position_at(d, t, scene))
        rots.append(dynamic_rotation_at(d, t, scene))
    opac = np.concatenate([s.opacity, d.opacity * temporal_opacity_at(d, t)])
    return (np.concatenate(means, axis=0).reshape(-1, 3),
            np.exp(np.concatenate([s.log_scale, d.log_scale], axis=0)),
            np.concatenate(rots, axis=0).reshape(-1, 4),
            opac,
            np.concatenate([s.sh, d.sh], axis=0))
