"""The ten acceptance criteria, each at its stated tolerance and time budget.

Every test prints one ``PASS``/``FAIL`` line (also collected in the pytest
terminal summary).  The RD sweeps run through the command line front end on
the standard scene file, exactly as a user would run them.
"""
import contextlib
import math
import time

import numpy as np
import pytest
from skimage.metrics import structural_similarity
from sklearn.cluster import KMeans

from g4c import rangecoder as rc
from g4c.cli import main
from g4c.codec import decode_scene, encode_scene, parse
from g4c.errors import FormatError
from g4c.experiments import ablate_opacity, run_level
from g4c.metrics import distortion_loss
from g4c.model import quat_conjugate, quat_log, quat_multiply
from g4c.presets import LEVELS, LevelPreset, level_preset
from g4c.quant import (EcvqCodebook, PruneMask, ShMask, ecvq_assign, ecvq_train, gs_prune_loss,
                       index_entropy, sh_prune_loss)
from g4c.rate import entropy_loss, reg_loss, total_loss, vq_loss
from g4c.render import ProbeSet
from g4c.scenefile import read_scene, scene_to_bytes, write_scene
from g4c.synth import random_scene, smooth_orbit_scene, standard_scene
from g4c.wavelet import (from_coefficients, haar_forward, haar_inverse, haar_matrix,
                         mask_details, padded_length)

from conftest import ACCEPTANCE_LINES
from test_codec import GOLDEN, assert_same_scene, golden_bytes, random_masks, random_preset


@contextlib.contextmanager
def criterion(n, title, budget=None, already=0.0):
    """``already``: seconds spent on this criterion in a shared fixture."""
    t0 = time.perf_counter() - already
    status, note = "FAIL", ""
    try:
        yield
        elapsed = time.perf_counter() - t0
        if budget is not None and elapsed > budget:
            note = f" (over budget: {elapsed:.1f}s > {budget}s)"
            raise AssertionError(f"criterion {n} took {elapsed:.1f}s, budget {budget}s")
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - t0
        line = f"{status} criterion {n}: {title} [{elapsed:.1f}s]{note}"
        ACCEPTANCE_LINES.append(line)
        print(line)


# ---------------------------------------------------------------------------
# shared sweep on the standard scene file

def run_cli_sweep(tmp, tag):
    csv = tmp / f"sweep_{tag}.csv"
    out = tmp / f"containers_{tag}"
    assert main(["sweep", str(tmp / "standard.g4s"), "--csv", str(csv),
                 "--out-dir", str(out)]) == 0
    rows = []
    lines = csv.read_text().splitlines()
    header = lines[1].split(",")
    for line in lines[2:]:
        rows.append({k: float(v) for k, v in zip(header, line.split(","))})
    blobs = {lvl: (out / f"level_{lvl}.g4c").read_bytes() for lvl in LEVELS}
    return rows, csv.read_bytes(), blobs


@pytest.fixture(scope="module")
def standard_file(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("acceptance")
    assert main(["gen", str(tmp / "standard.g4s")]) == 0
    return tmp


@pytest.fixture(scope="module")
def first_sweep(standard_file):
    t0 = time.perf_counter()
    result = run_cli_sweep(standard_file, "a")
    return result, time.perf_counter() - t0


# ---------------------------------------------------------------------------

def textbook_haar(length, levels):
    """Orthonormal Haar analysis matrix from Kronecker products."""
    s = 1 / math.sqrt(2)
    approx_rows = np.eye(length)
    rows = []
    n = length
    for _ in range(levels):
        half = n // 2
        avg = np.kron(np.eye(half), [[s, s]])
        dif = np.kron(np.eye(half), [[s, -s]])
        rows.append(dif @ approx_rows)
        approx_rows = avg @ approx_rows
        n = half
    return np.vstack([approx_rows] + rows[::-1])


def test_criterion_1_wavelet_correctness():
    with criterion(1, "Haar orthonormality and round trips", budget=5):
        rng = np.random.default_rng(1)
        for tk in (4, 8, 16, 32, 64):
            for levels in range(1, int(math.log2(tk)) + 1):
                w = haar_matrix(tk, levels)
                assert np.max(np.abs(w @ w.T - np.eye(tk))) <= 1e-12
                assert np.max(np.abs(w - textbook_haar(tk, levels))) <= 1e-12
            x = rng.normal(size=(1000, tk, 3)) * rng.uniform(0.01, 100, (1000, 1, 1))
            for levels in (1, int(math.log2(tk))):
                back = haar_inverse(haar_forward(x, levels))
                rel = np.abs(back - x).max(axis=(1, 2)) / np.abs(x).max(axis=(1, 2))
                assert rel.max() <= 1e-10


def test_criterion_2_retained_fractions():
    with criterion(2, "retained fractions 1/2, 1/4, 1/8"):
        x = np.random.default_rng(2).normal(size=(10, 64, 3))
        for depth in (1, 2, 3):
            pyr = mask_details(haar_forward(x, depth))
            assert pyr.retained_count * 2 ** depth == 64
            assert pyr.coefficients().shape[1] * 2 ** depth == 64
            back = from_coefficients(pyr.coefficients(), depth, 64)
            assert np.array_equal(haar_inverse(back), haar_inverse(pyr))
        # what lands in the container: 33 keyframes, reflect-padded per depth
        scene = standard_scene(probes=False)[0]
        n = scene.n_gaussians
        keep = PruneMask.keep_all(n)
        sh = ShMask.keep_all(n, scene.sh_degree)
        tk = scene.n_keyframes
        assert tk == 33
        for depth in (1, 2, 3):
            preset = LevelPreset(wavelet_levels=depth, codebook_size=4, ecvq_iters=1)
            container, _ = encode_scene(scene, preset, masks=(keep, sh))
            stored = parse(container.data).traj
            assert stored.shape[1] * 2 ** depth == padded_length(tk, depth)
            assert stored.shape[0] == len(scene.dynamics)


def two_clusters(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    half = n // 2
    return np.vstack([rng.normal([-2.0, 0.0, 1.0], 0.3, (half, 3)),
                      rng.normal([2.0, 1.0, -1.0], 0.3, (n - half, 3))])


def test_criterion_3_ecvq_sanity():
    with criterion(3, "ECVQ: k-means recovery, rate pressure, monotone objective", budget=10):
        x = two_clusters()
        cb = ecvq_train(x, 2, 0.0, iters=50, seed=0)
        km = KMeans(2, n_init=10, random_state=0).fit(x)
        ours = cb.codewords[np.argsort(cb.codewords[:, 0])]
        oracle = km.cluster_centers_[np.argsort(km.cluster_centers_[:, 0])]
        assert np.max(np.abs(ours - oracle)) <= 1e-3
        h = {}
        for lam in (0.0, 0.5):
            book = ecvq_train(x, 16, lam, iters=30, seed=0)
            hist = np.asarray(book.history)
            assert np.all(np.diff(hist) <= 1e-9 * np.maximum(1.0, np.abs(hist[1:])))
            h[lam] = index_entropy(ecvq_assign(x, book)[0])
        assert h[0.5] < h[0.0]


def test_criterion_4_coder_tightness():
    with criterion(4, "range coder within [H, 1.02 H + 64 B], lossless", budget=10):
        rng = np.random.default_rng(4)
        for _ in range(20):
            m = int(rng.integers(2, 512))
            t = rc.FrequencyTable.from_probabilities(rng.dirichlet(np.full(m, rng.uniform(0.05, 3))))
            s = rng.choice(m, size=10_000, p=t.probabilities)
            out = rc.range_encode(s, t)
            h = float(-np.sum(np.log2(t.probabilities[s]))) / 8
            assert h <= len(out) <= 1.02 * h + 64
            assert np.array_equal(rc.range_decode(out, t, s.size), s)


def test_criterion_5_container_round_trip():
    with criterion(5, "100 bit-exact container round trips, truncation always detected",
                   budget=60):
        for seed in range(100):
            rng = np.random.default_rng(1000 + seed)
            scene = random_scene(rng)
            container, _ = encode_scene(scene, random_preset(rng), seed=seed,
                                        masks=random_masks(rng, scene))
            assert_same_scene(decode_scene(container.data), container.model)
        name = max(GOLDEN, key=lambda k: GOLDEN[k]["size"])
        data = golden_bytes(name)
        for cut in range(len(data)):
            with pytest.raises(FormatError):
                decode_scene(data[:cut])


def test_criterion_6_rd_sweep_shape(standard_file, first_sweep):
    (rows, _, blobs), elapsed = first_sweep
    with criterion(6, "sweep sizes rise, PSNR rises (0.1 dB slack), level 1 >= 10x",
                   budget=300, already=elapsed):
        sizes = [r["size"] for r in rows]
        psnrs = [r["psnr"] for r in rows]
        assert [int(r["level"]) for r in rows] == list(LEVELS)
        assert all(a <= b for a, b in zip(sizes, sizes[1:])), sizes
        assert all(b >= a - 0.1 for a, b in zip(psnrs, psnrs[1:])), psnrs
        assert all(len(blobs[lvl]) == r["size"] for lvl, r in zip(LEVELS, rows))
        idx = [r["bytes_indexes"] for r in rows]
        assert all(a <= b for a, b in zip(idx, idx[1:])), idx
        raw = (standard_file / "standard.g4s").stat().st_size
        assert raw / sizes[0] >= 10.0, raw / sizes[0]
        print(f"  sizes {sizes}\n  psnr {[round(p, 3) for p in psnrs]}\n"
              f"  raw/level1 {raw / sizes[0]:.1f}x")


def test_criterion_7_wavelet_rd_benefit():
    with criterion(7, "wavelet saves >= 10% with <= 0.05 dB PSNR loss at every level",
                   budget=300):
        scene, probes = smooth_orbit_scene()
        for level in LEVELS:
            on, _ = run_level(scene, level_preset(level), probes)
            off, _ = run_level(scene, level_preset(level, wavelet_levels=0), probes)
            saving = 1 - on["size"] / off["size"]
            drop = off["psnr"] - on["psnr"]
            print(f"  level {level}: saving {saving:.3f}, PSNR change {-drop:+.4f} dB")
            assert saving >= 0.10, (level, saving)
            assert drop <= 0.05, (level, drop)


def test_criterion_8_opacity_ladder(first_sweep):
    (_, _, blobs), _ = first_sweep
    with criterion(8, "opacity ladder: sizes shrink, variances hurt most, pass-through",
                   budget=180):
        scene, probes = standard_scene()
        rows = ablate_opacity(scene, level=6, probes=probes)
        sizes = [r["size"] for r in rows]
        assert all(a > b for a, b in zip(sizes, sizes[1:])), sizes
        base = rows[0]["psnr"]
        drops = [base - r["psnr"] for r in rows[1:]]
        assert drops[-1] == max(drops) and drops[-1] > drops[-2], drops
        print(f"  sizes {sizes}\n  psnr drops {[round(d, 5) for d in drops]}")
        # default policy (every level of the sweep): variances untouched
        for lvl in LEVELS:
            data = blobs[lvl]
            keep = parse(data).keep[len(scene.statics):]
            out = decode_scene(data)
            assert np.array_equal(out.dynamics.variances, scene.dynamics.variances[keep])


def brute_ssim_loss(a, b, lam):
    l1 = sum(abs(x - y) for x, y in zip(a.ravel().tolist(), b.ravel().tolist())) / a.size
    s = structural_similarity(a, b, channel_axis=2, data_range=1.0, gaussian_weights=True,
                              sigma=1.5, use_sample_covariance=False, full=True)[1]
    return (1 - lam) * l1 + lam * (1 - float(np.mean(s)))


def brute_reg(scene):
    total = 0.0
    s = scene.statics
    if len(s):
        total += sum(float(v @ v) for v in s.disp) / len(s)
    d = scene.dynamics
    if len(d) and d.n_keyframes >= 3:
        acc = []
        rot = []
        for g in range(len(d)):
            p, q = d.positions[g], d.rotations[g]
            for k in range(1, d.n_keyframes - 1):
                a = p[k + 1] - 2 * p[k] + p[k - 1]
                acc.append(float(a @ a))
            om = [quat_log(quat_multiply(quat_conjugate(q[k]), q[k + 1]))
                  for k in range(d.n_keyframes - 1)]
            for k in range(len(om) - 1):
                e = om[k + 1] - om[k]
                rot.append(float(e @ e))
        total += sum(acc) / len(acc) + sum(rot) / len(rot)
    return total


def test_criterion_9_loss_accounting():
    with criterion(9, "total loss composition and entropy term vs brute force"):
        rng = np.random.default_rng(9)
        for _ in range(50):
            scene = random_scene(rng, sh_degree=int(rng.integers(1, 4)))
            while scene.n_gaussians == 0:
                scene = random_scene(rng, sh_degree=int(rng.integers(1, 4)))
            n, k = scene.n_gaussians, scene.sh_degree
            gs = PruneMask(rng.random(n))
            sh = ShMask(rng.random((n, k)))
            img_a = rng.random((12, 14, 3))
            img_b = np.clip(img_a + rng.normal(0, 0.1, img_a.shape), 0, 1)
            lam_dssim = float(rng.uniform(0, 1))
            streams, books, samples, divisors = {}, {}, {}, {}
            for g in range(int(rng.integers(1, 5))):
                m, dim = int(rng.integers(1, 9)), int(rng.integers(1, 5))
                cb = EcvqCodebook(rng.normal(size=(m, dim)), rng.dirichlet(np.ones(m)), 0.1)
                books[g], streams[g] = cb, rng.integers(0, m, n)
                samples[g] = rng.normal(size=(n, dim))
                divisors[g] = float(rng.uniform(0.5, 2))
            w = dict(lambda_r=float(rng.uniform(0, 2)), lambda_reg=float(rng.uniform(0, 1)),
                     lambda_gs=float(rng.uniform(0, 1)), lambda_sh=float(rng.uniform(0, 1)))
            got = total_loss(distortion_loss(img_a, img_b, lam_dssim), gs_prune_loss(gs),
                             sh_prune_loss(sh), entropy_loss(streams, books, divisors),
                             vq_loss(samples, streams, books), reg_loss(scene),
                             lambda_dssim=lam_dssim, **w)

            dist = brute_ssim_loss(img_a, img_b, lam_dssim)
            l_gs = sum(gs.soft.tolist()) / n
            weights = [(2 * l + 1) / ((k + 1) ** 2 - 1) for l in range(1, k + 1)]
            l_sh = sum(sum(wt * v for wt, v in zip(weights, row)) for row in sh.soft.tolist()) / n
            l_ent = sum(-math.log2(books[g].probabilities[j]) / divisors[g]
                        for g in streams for j in streams[g].tolist()) / n
            l_vq = sum(float(np.sum((samples[g][i] - books[g].codewords[j]) ** 2))
                       for g in streams for i, j in enumerate(streams[g].tolist())) / n
            l_rate = w["lambda_gs"] * l_gs + w["lambda_sh"] * l_sh + l_ent + l_vq
            expect = dist + w["lambda_r"] * l_rate + w["lambda_reg"] * brute_reg(scene)
            assert got.l_total == pytest.approx(expect, rel=1e-9, abs=1e-12)
            assert got.l_rate == pytest.approx(l_rate, rel=1e-9, abs=1e-12)
        # frequency-matched stream: mean rate is the empirical entropy
        counts = rng.integers(1, 500, 12)
        stream = rng.permutation(np.repeat(np.arange(12), counts))
        cb = EcvqCodebook(np.zeros((12, 1)), counts / counts.sum(), 0.1)
        h = float(-np.sum(counts / counts.sum() * np.log2(counts / counts.sum())))
        assert abs(entropy_loss({"g": stream}, {"g": cb}) - h) <= 1e-9


def test_criterion_10_determinism(standard_file, first_sweep):
    (_, csv_a, blobs_a), _ = first_sweep
    with criterion(10, "two identical sweeps give byte-identical containers and CSVs"):
        _, csv_b, blobs_b = run_cli_sweep(standard_file, "b")
        assert csv_a == csv_b
        for lvl in LEVELS:
            assert blobs_a[lvl] == blobs_b[lvl], lvl
