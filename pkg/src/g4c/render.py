"""CPU splatting renderer and the fixed probe set used as distortion oracle.

Pinhole projection with the EWA Jacobian linearisation, depth sort with a
(depth, Gaussian id) key, then front-to-back alpha compositing in
:func:`g4c.kernels.composite`.  A Gaussian's 2D alpha at a pixel is its
opacity times its unnormalised 2D density there, clamped to 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ValidationError
from .metrics import distortion_loss, psnr, ssim
from .model import GaussianScene, covariance_of, evaluate_at

NEAR = 0.05
DILATION = 0.3  # px^2 added to the 2D covariance diagonal (anti-aliasing)

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
         -0.4570457994644658, 1.445305721320277, -0.5900435899266435)


@dataclass(frozen=True)
class ProbeCamera:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray = field(repr=False)  # world -> camera
    translation: np.ndarray = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("image dimensions must be positive")
        r = np.asarray(self.rotation, dtype=np.float64)
        if r.shape != (3, 3) or not np.allclose(r @ r.T, np.eye(3), atol=1e-9):
            raise ValidationError("camera rotation must be orthonormal")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64))

    @property
    def center(self):
        return -self.rotation.T @ self.translation

    def at(self, time):
        return ProbeCamera(self.width, self.height, self.fx, self.fy, self.cx, self.cy,
                           self.rotation, self.translation, float(time))


def look_at(eye, target=(0.0, 0.0, 0.0), up=(0.0, 0.0, 1.0), width=64, height=64,
            fov_deg=50.0, time=0.0):
    """Camera at ``eye`` looking at ``target``; +z forward, +y down in image."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd])
    f = 0.5 * width / np.tan(np.radians(fov_deg) / 2)
    return ProbeCamera(width, height, f, f, (width - 1) / 2.0, (height - 1) / 2.0,
                       rot, -rot @ eye, time)


def sh_basis(dirs, degree):
    """Real SH basis values ``(N, (degree+1)**2)`` for unit directions."""
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    out = [np.full(len(dirs), SH_C0)]
    if degree >= 1:
        out += [-SH_C1 * y, SH_C1 * z, -SH_C1 * x]
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        out += [SH_C2[0] * x * y, SH_C2[1] * y * z, SH_C2[2] * (2 * zz - xx - yy),
                SH_C2[3] * x * z, SH_C2[4] * (xx - yy)]
    if degree >= 3:
        out += [SH_C3[0] * y * (3 * xx - yy), SH_C3[1] * x * y * z,
                SH_C3[2] * y * (4 * zz - xx - yy), SH_C3[3] * z * (2 * zz - 3 * xx - 3 * yy),
                SH_C3[4] * x * (4 * zz - xx - yy), SH_C3[5] * z * (xx - yy),
                SH_C3[6] * x * (xx - 3 * yy)]
    return np.stack(out, axis=1)


@dataclass
class Splats:
    """Projected Gaussians for one camera at one time, in scene order."""

    means: np.ndarray
    conics: np.ndarray
    opacity: np.ndarray
    radii: np.ndarray
    depth: np.ndarray
    order: np.ndarray
    sh_terms: np.ndarray  # (N, degree+1, 3) colour contribution of each SH band
    width: int
    height: int

    def colors(self, sh_keep=None):
        """RGB per Gaussian; ``sh_keep (N, degree)`` masks bands 1..degree."""
        terms = self.sh_terms
        c = 0.5 + terms[:, 0]
        if terms.shape[1] > 1:
            if sh_keep is None:
                c = c + terms[:, 1:].sum(axis=1)
            else:
                c = c + np.einsum("nl,nlc->nc", sh_keep.astype(np.float64), terms[:, 1:])
        return np.maximum(c, 0.0)


def project(scene: GaussianScene, cam: ProbeCamera) -> Splats:
    means, scales, rots, opac, sh = evaluate_at(scene, cam.time)
    n = len(means)
    degree = scene.sh_degree
    if n == 0:
        z = np.zeros(0)
        return Splats(np.zeros((0, 2)), np.zeros((0, 3)), z, np.zeros(0, np.int64), z,
                      np.zeros(0, np.int64), np.zeros((0, degree + 1, 3)), cam.width, cam.height)
    rots = rots / np.linalg.norm(rots, axis=1, keepdims=True)
    pc = means @ cam.rotation.T + cam.translation
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    visible = z > NEAR
    zs = np.where(visible, z, 1.0)
    u = cam.fx * x / zs + cam.cx
    v = cam.fy * y / zs + cam.cy

    cov3 = covariance_of(scales, rots)
    w = cam.rotation
    j = np.zeros((n, 2, 3))
    j[:, 0, 0] = cam.fx / zs
    j[:, 0, 2] = -cam.fx * x / (zs * zs)
    j[:, 1, 1] = cam.fy / zs
    j[:, 1, 2] = -cam.fy * y / (zs * zs)
    t = j @ w
    cov2 = t @ cov3 @ np.swapaxes(t, 1, 2)
    a = cov2[:, 0, 0] + DILATION
    b = cov2[:, 0, 1]
    c = cov2[:, 1, 1] + DILATION
    det = a * c - b * b
    conics = np.stack([c / det, -b / det, a / det], axis=1)
    mid = 0.5 * (a + c)
    lam = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    radii = np.ceil(3.0 * np.sqrt(lam)).astype(np.int64)
    offscreen = ((u + radii < 0) | (u - radii > cam.width - 1)
                 | (v + radii < 0) | (v - radii > cam.height - 1))
    radii[~visible | offscreen | (opac <= 0)] = 0

    dirs = means - cam.center
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-12)
    basis = sh_basis(dirs, degree)
    bands = np.zeros((n, degree + 1, 3))
    for level in range(degree + 1):
        sl = slice(level * level, (level + 1) ** 2)
        bands[:, level] = np.einsum("nk,nkc->nc", basis[:, sl], sh[:, sl])

    depth = np.where(visible, z, np.inf)
    order = np.lexsort((np.arange(n), depth)).astype(np.int64)
    return Splats(np.stack([u, v], axis=1), conics, np.clip(opac, 0.0, 1.0), radii, depth,
                  order, bands, cam.width, cam.height)


def composite(splats: Splats, keep=None, sh_keep=None, background=(0.0, 0.0, 0.0)):
    n = len(splats.opacity)
    if keep is None:
        keep = np.ones(n, dtype=np.bool_)
    return kernels.composite(splats.means, splats.conics, splats.opacity,
                             splats.colors(sh_keep), splats.radii, splats.order,
                             np.asarray(keep, dtype=np.bool_), splats.width, splats.height,
                             np.asarray(background, dtype=np.float64))


def render(scene: GaussianScene, cam: ProbeCamera, background=(0.0, 0.0, 0.0)):
    """Render ``scene`` at ``cam.time``; an empty scene yields the background."""
    return composite(project(scene, cam), background=background)


# ---------------------------------------------------------------------------
# probe set

@dataclass
class ProbeSet:
    """Fixed cameras x timestamps with ground-truth frames."""

    cameras: list
    truth: list
    lambda_dssim: float = 0.2
    background: tuple = (0.0, 0.0, 0.0)
    # memo for pure functions of (scene, probes), e.g. pruning curves
    cache: dict = field(default_factory=dict, repr=False, compare=False)
    _stack: np.ndarray = field(default=None, repr=False, compare=False)

    @classmethod
    def standard(cls, scene: GaussianScene, seed=0, n_views=8, n_times=4, size=64,
                 radius=None, lambda_dssim=0.2):
        """``n_views`` cameras on a ring around the scene, ``n_times`` frame times."""
        rng = np.random.default_rng(seed)
        extent = scene.extent()
        radius = 2.2 * extent if radius is None else radius
        offset = rng.uniform(0, 2 * np.pi / n_views)
        times = np.asarray(scene.timestamps or [0.0])
        if len(times) >= n_times:
            # one draw per equal-width slice of the timeline
            edges = np.linspace(0, len(times), n_times + 1).astype(int)
            pick = [rng.integers(edges[i], max(edges[i + 1], edges[i] + 1))
                    for i in range(n_times)]
            times = times[pick]
        cams = []
        for i in range(n_views):
            ang = offset + 2 * np.pi * i / n_views
            h = 0.35 * radius * (1 if i % 2 == 0 else -0.5)
            eye = (radius * np.cos(ang), radius * np.sin(ang), h)
            base = look_at(eye, width=size, height=size)
            cams.extend(base.at(min(float(t), scene.duration)) for t in times)
        probes = cls(cams, [], lambda_dssim)
        probes.truth = probes.render_all(scene)
        return probes

    def render_all(self, scene):
        return [render(scene, cam, self.background) for cam in self.cameras]

    def splats(self, scene):
        return [project(scene, cam) for cam in self.cameras]

    def distortion(self, images):
        """Mean distortion loss over the probe images."""
        return distortion_loss(np.stack(images), self._truth_stack(), self.lambda_dssim,
                               axes=(1, 2))

    def _truth_stack(self):
        if self._stack is None or len(self._stack) != len(self.truth):
            self._stack = np.stack(self.truth)
        return self._stack

    def psnr(self, images):
        """PSNR over the whole probe set (pooled MSE)."""
        return psnr(np.stack(images), np.stack(self.truth))

    def ssim(self, images):
        return ssim(np.stack(images), self._truth_stack(), axes=(1, 2))


# ---------------------------------------------------------------------------
# PPM I/O

def write_ppm(path, image):
    img = np.round(np.clip(np.asarray(image, dtype=np.float64), 0, 1) * 255).astype(np.uint8)
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_ppm(path):
    with open(path, "rb") as f:
        data = f.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P6" or int(tokens[3]) != 255:
        raise ValidationError("only 8-bit binary PPM (P6) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(data[pos + 1:pos + 1 + w * h * 3], dtype=np.uint8)
    return pixels.reshape(h, w, 3).astype(np.float64) / 255.0
