import math

import numpy as np
import pytest

from g4c.codec import size_report
from g4c.container import SECTIONS
from g4c.experiments import ablate_opacity, ablate_wavelet, evaluate, run_level, \
    scene_trajectory_psnr, sweep
from g4c.presets import level_preset
from g4c.synth import SynthConfig, generate_synthetic_scene

TINY = SynthConfig(n_static=150, n_dynamic=40, n_frames=14, n_views=2, n_times=2, image_size=24)
FAST = dict(prune_grid=8, ecvq_iters=4, codebook_size=32)


@pytest.fixture(scope="module")
def tiny():
    return generate_synthetic_scene(TINY, seed=6)


def test_sweep_rows_in_level_order_and_sizes_add_up(tiny):
    scene, _ = tiny
    rows, blobs = sweep(scene, [3, 1], overrides=FAST, with_data=True, workers=1)
    assert [r["level"] for r in rows] == [3, 1]
    for r, data in zip(rows, blobs):
        parts = sum(r[f"bytes_{name}"] for name in SECTIONS) + r["bytes_header"]
        assert parts == r["size"] == len(data)
        assert r["static_kept"] + r["static_pruned"] == len(scene.statics)
        assert r["dynamic_kept"] + r["dynamic_pruned"] == len(scene.dynamics)


def test_parallel_sweep_matches_in_process(tiny):
    scene, _ = tiny
    a = sweep(scene, [1, 6], overrides=FAST, workers=1)
    b = sweep(scene, [1, 6], overrides=FAST, workers=2)
    assert a == b


def test_trajectory_section_share_reported_at_both_ends(tiny):
    scene, _ = tiny
    rows, blobs = sweep(scene, [1, 6], overrides=FAST, with_data=True, workers=1)
    for data in blobs:
        pct = size_report(data).percentages["F_masked"]
        assert 0.0 < pct < 100.0


def test_trajectory_psnr_edge_cases(tiny):
    scene, _ = tiny
    keep = np.ones(len(scene.dynamics), bool)
    assert scene_trajectory_psnr(scene, scene, keep) == math.inf
    assert math.isnan(scene_trajectory_psnr(scene, scene, np.zeros_like(keep)))


def test_evaluate_lossless_container_scores_high(tiny):
    scene, probes = tiny
    row, container = run_level(scene, level_preset(6, **FAST), probes)
    again = evaluate(scene, container.data, probes)
    assert again == {k: row[k] for k in ("psnr", "ssim", "traj_psnr")}
    assert row["psnr"] > 25


def test_wavelet_ablation_retains_exact_fractions(tiny):
    scene, probes = tiny
    rows = ablate_wavelet(scene, (1, 2, 3), level=4, overrides=FAST, probes=probes)
    for r in rows:
        assert r["retained"] * 2 ** r["depth"] == r["padded"]
        assert r["padded"] >= r["raw"] == scene.n_keyframes


def test_opacity_ablation_rows(tiny):
    scene, probes = tiny
    rows = ablate_opacity(scene, level=3, overrides=FAST, probes=probes)
    assert [r["policy"] for r in rows][0] == "none"
    sizes = [r["size"] for r in rows]
    assert all(a > b for a, b in zip(sizes, sizes[1:]))


# ---------------------------------------------------------------------------
# the depth study on the standard scene

@pytest.fixture(scope="module")
def depth_rows(standard):
    scene, probes = standard
    return ablate_wavelet(scene, (1, 2, 3), level=6, probes=probes)


@pytest.mark.slow
def test_deeper_wavelet_never_improves_probe_psnr(depth_rows):
    psnr = [r["psnr"] for r in depth_rows]
    assert psnr[0] >= psnr[1] >= psnr[2]
    sizes = [r["bytes_F_masked"] for r in depth_rows]
    assert sizes[0] > sizes[1] > sizes[2]


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="coarser approximation coefficients cost more bits "
                   "each under DPCM; the byte ratio lands near 0.65, see decisions ledger")
def test_trajectory_bytes_halve_from_depth_one_to_two(depth_rows):
    ratio = depth_rows[1]["bytes_F_masked"] / depth_rows[0]["bytes_F_masked"]
    assert abs(ratio - 0.5) <= 0.05
