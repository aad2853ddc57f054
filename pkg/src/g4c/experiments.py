"""Rate-distortion sweeps and ablations over one scene.

Each driver returns a list of row dicts in a fixed column order; the CLI
turns them into tables and CSV files.  Rows always come back in input
order, whether or not levels were encoded in parallel.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ._jit import thread_cap
from .codec import decode_scene, encode_scene, parse
from .container import SECTIONS
from .metrics import trajectory_psnr
from .model import GaussianScene, hermite_interpolate
from .presets import LEVELS, level_preset
from .quant import POLICY_LADDER
from .render import ProbeSet
from .wavelet import padded_length

CSV_SCHEMA = 1


def _positions(scene: GaussianScene):
    keys = scene.dynamics.positions
    return np.stack([hermite_interpolate(keys, t, scene.keyframe_interval)
                     for t in scene.timestamps], axis=1)


def scene_trajectory_psnr(original: GaussianScene, decoded: GaussianScene, keep_dynamic):
    """Trajectory PSNR of the dynamics that survived pruning, over all timestamps.

    NaN when nothing dynamic is left to compare.
    """
    if not keep_dynamic.any() or not original.timestamps:
        return math.nan
    ref = _positions(original)[keep_dynamic]
    return trajectory_psnr(ref, _positions(decoded), original.extent())


def evaluate(scene: GaussianScene, data: bytes, probes: ProbeSet) -> dict:
    """Decode ``data`` and score it against ``scene`` on ``probes``."""
    decoded = decode_scene(data)
    images = probes.render_all(decoded)
    keep = parse(data).keep[len(scene.statics):]
    return {"psnr": probes.psnr(images), "ssim": probes.ssim(images),
            "traj_psnr": scene_trajectory_psnr(scene, decoded, keep)}


def _size_columns(container, report):
    cols = {f"bytes_{name}": report.sections[name] for name in SECTIONS}
    cols["bytes_header"] = report.header_bytes
    return cols


def run_level(scene, preset, probes, seed=0):
    """Encode at one preset and evaluate; returns ``(row, container)``."""
    container, report = encode_scene(scene, preset, seed=seed, probes=probes)
    scores = evaluate(scene, container.data, probes)
    prune = container.prune
    row = {"level": preset.level, "wavelet_levels": preset.wavelet_levels,
           "size": container.size, **scores,
           "static_kept": report.counts["static_after"],
           "dynamic_kept": report.counts["dynamic_after"],
           "static_pruned": prune.static_pruned, "dynamic_pruned": prune.dynamic_pruned,
           "sh_pruned": prune.sh_pruned, **_size_columns(container, report)}
    return row, container


def _probes(scene, seed, preset=None):
    lam = 0.2 if preset is None else preset.lambda_dssim
    return ProbeSet.standard(scene, seed=seed, lambda_dssim=lam)


def _level_job(args):
    scene, level, seed, overrides = args
    preset = level_preset(level, **overrides)
    row, container = run_level(scene, preset, _probes(scene, seed, preset), seed)
    return row, container.data


def sweep(scene: GaussianScene, levels=LEVELS, seed=0, overrides=None, probes=None,
          workers=None, with_data=False):
    """One row per level.  ``workers`` defaults to ``G4C_THREADS`` (1 = in process).

    In-process runs share ``probes`` (and its pruning cache) across levels.
    ``with_data=True`` returns ``(rows, container_bytes)`` instead of rows.
    """
    overrides = dict(overrides or {})
    levels = list(levels)
    workers = thread_cap() if workers is None else max(1, int(workers))
    if workers > 1 and len(levels) > 1:
        jobs = [(scene, lvl, seed, overrides) for lvl in levels]
        with ProcessPoolExecutor(max_workers=min(workers, len(levels))) as pool:
            results = list(pool.map(_level_job, jobs))
    else:
        results = []
        for lvl in levels:
            preset = level_preset(lvl, **overrides)
            probes = probes or _probes(scene, seed, preset)
            row, container = run_level(scene, preset, probes, seed)
            results.append((row, container.data))
    rows = [r for r, _ in results]
    return (rows, [d for _, d in results]) if with_data else rows


def ablate_opacity(scene, level=6, seed=0, overrides=None, probes=None, ladder=POLICY_LADDER):
    """Opacity quantization ladder: each row adds one quantized attribute."""
    overrides = {k: v for k, v in (overrides or {}).items() if k != "policy"}
    rows = []
    for name, policy in ladder:
        preset = level_preset(level, policy=policy, **overrides)
        probes = probes or _probes(scene, seed, preset)
        row, container = run_level(scene, preset, probes, seed)
        rows.append({"policy": name, "size": row["size"], "psnr": row["psnr"],
                     "ssim": row["ssim"],
                     "bytes_opacity_centers": row["bytes_opacity_centers"],
                     "bytes_beta_var": row["bytes_beta_var"],
                     "bytes_base_opacities": row["bytes_base_opacities"]})
    return rows


def ablate_wavelet(scene, depths=(1, 2, 3), level=6, seed=0, overrides=None, probes=None):
    """Size and quality per decomposition depth (details fully discarded).

    Raises ``AssertionError`` if a depth does not keep exactly ``1/2**depth``
    of the padded trajectory coefficients.
    """
    overrides = {k: v for k, v in (overrides or {}).items()
                 if k not in ("wavelet_levels", "keep_levels")}
    tk = scene.n_keyframes
    rows = []
    for depth in depths:
        preset = level_preset(level, wavelet_levels=depth, keep_levels=0, **overrides)
        probes = probes or _probes(scene, seed, preset)
        row, container = run_level(scene, preset, probes, seed)
        n_dyn = row["dynamic_kept"]
        padded = padded_length(tk, depth) if depth else tk
        if n_dyn:
            retained = parse(container.data).traj.shape[1]
        else:
            retained = padded >> depth
        assert retained * (1 << depth) == padded, (depth, retained, padded)
        rows.append({"depth": depth, "size": row["size"], "bytes_F_masked": row["bytes_F_masked"],
                     "retained": retained, "raw": tk, "padded": padded,
                     "psnr": row["psnr"], "ssim": row["ssim"], "traj_psnr": row["traj_psnr"]})
    return rows
