"""Uncompressed scene interchange file (``.g4s``).

Layout, little-endian::

    b"G4SC"  u16 version  u32 header_len  header (UTF-8 JSON)
    static records   n_static  x (pivot 3, disp 3, log_scale 3, rotation 4,
                                   opacity 1, sh K*3)               float32
    dynamic records  n_dynamic x (positions Tk*3, rotations Tk*4, log_scale 3,
                                   opacity 1, centers 2, variances 2, sh K*3)
                                                                     float32

The JSON header carries ``n_static``, ``n_dynamic``, ``duration``,
``keyframe_interval``, ``sh_degree``, ``n_keyframes`` and ``timestamps``.
Rotations are quaternions ``(w, x, y, z)``; scales are natural logs.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .errors import FormatError
from .model import DynamicGaussians, GaussianScene, StaticGaussians, sh_count

MAGIC = b"G4SC"
VERSION = 1
_HEADER_KEYS = {"n_static", "n_dynamic", "duration", "keyframe_interval", "sh_degree",
                "n_keyframes", "timestamps"}


def _static_widths(k):
    return [("pivot", 3), ("disp", 3), ("log_scale", 3), ("rotation", 4), ("opacity", 1),
            ("sh", 3 * k)]


def _dynamic_widths(k, tk):
    return [("positions", 3 * tk), ("rotations", 4 * tk), ("log_scale", 3), ("opacity", 1),
            ("centers", 2), ("variances", 2), ("sh", 3 * k)]


def scene_to_bytes(scene: GaussianScene) -> bytes:
    k = sh_count(scene.sh_degree)
    tk = scene.n_keyframes
    header = json.dumps({
        "n_static": len(scene.statics), "n_dynamic": len(scene.dynamics),
        "duration": scene.duration, "keyframe_interval": scene.keyframe_interval,
        "sh_degree": scene.sh_degree, "n_keyframes": tk,
        "timestamps": list(scene.timestamps)}, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<HI", VERSION, len(header)), header]
    for group, widths in ((scene.statics, _static_widths(k)),
                          (scene.dynamics, _dynamic_widths(k, tk))):
        n = len(group)
        cols = [getattr(group, name).reshape(n, w) for name, w in widths]
        parts.append(np.concatenate(cols, axis=1).astype("<f4").tobytes() if n else b"")
    return b"".join(parts)


def scene_from_bytes(data: bytes) -> GaussianScene:
    if data[:4] != MAGIC:
        raise FormatError("not a scene file (bad magic)")
    if len(data) < 10:
        raise FormatError("scene file truncated in header")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported scene file version {version}")
    try:
        h = json.loads(data[10:10 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"scene header unreadable: {exc}") from None
    missing = _HEADER_KEYS - set(h) if isinstance(h, dict) else _HEADER_KEYS
    if missing:
        raise FormatError(f"scene header lacks {sorted(missing)}")
    k = sh_count(h["sh_degree"])
    tk = h["n_keyframes"]
    pos = 10 + hlen
    arrays = []
    for n, widths in ((h["n_static"], _static_widths(k)), (h["n_dynamic"], _dynamic_widths(k, tk))):
        row = sum(w for _, w in widths)
        size = 4 * n * row
        if pos + size > len(data):
            raise FormatError("scene file truncated in records")
        flat = np.frombuffer(data, dtype="<f4", count=n * row, offset=pos).astype(np.float64)
        flat = flat.reshape(n, row)
        pos += size
        cols, c = {}, 0
        for name, w in widths:
            cols[name] = flat[:, c:c + w]
            c += w
        arrays.append(cols)
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} unexpected trailing byte(s) in scene file")
    s, d = arrays
    ns, nd = h["n_static"], h["n_dynamic"]
    statics = StaticGaussians(s["pivot"], s["disp"], s["log_scale"], s["rotation"],
                              s["opacity"][:, 0], s["sh"].reshape(ns, k, 3))
    dynamics = DynamicGaussians(d["positions"].reshape(nd, tk, 3),
                                d["rotations"].reshape(nd, tk, 4), d["log_scale"],
                                d["opacity"][:, 0], d["centers"], d["variances"],
                                d["sh"].reshape(nd, k, 3))
    return GaussianScene(statics, dynamics, h["duration"], h["keyframe_interval"],
                         tuple(h["timestamps"]), h["sh_degree"])


def write_scene(path, scene: GaussianScene):
    with open(path, "wb") as f:
        f.write(scene_to_bytes(scene))


def read_scene(path) -> GaussianScene:
    with open(path, "rb") as f:
        return scene_from_bytes(f.read())
