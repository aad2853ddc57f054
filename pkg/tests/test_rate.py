import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from g4c.errors import ValidationError
from g4c.model import DynamicGaussians, GaussianScene, StaticGaussians, axis_angle_quat
from g4c.quant import EcvqCodebook, index_entropy
from g4c.rate import entropy_loss, reg_loss, total_loss, vq_loss

from conftest import IDENTITY, one_dynamic


def _cb(p, dim=3, seed=0):
    p = np.asarray(p, dtype=float)
    cw = np.random.default_rng(seed).normal(size=(len(p), dim))
    return EcvqCodebook(cw, p, 0.1)


class TestEntropyLoss:
    def test_uniform_256(self):
        cb = _cb(np.full(256, 1 / 256))
        idx = np.random.default_rng(0).integers(0, 256, 1000)
        assert entropy_loss({"g": idx}, {"g": cb}) == pytest.approx(8.0)

    def test_certain_symbol(self):
        cb = _cb([1.0])
        assert entropy_loss({"g": np.zeros(10, int)}, {"g": cb}) == 0.0

    def test_frequency_matched_stream_is_entropy(self):
        counts = np.array([500, 250, 125, 100, 25])
        stream = np.repeat(np.arange(5), counts)
        cb = _cb(counts / counts.sum())
        got = entropy_loss({"g": stream}, {"g": cb})
        assert abs(got - index_entropy(stream)) <= 1e-9

    def test_divisors_and_groups(self):
        a, b = _cb([0.5, 0.5]), _cb([0.25, 0.75])
        streams = {"a": np.array([0, 1, 1, 0]), "b": np.array([0, 1, 1, 1])}
        got = entropy_loss(streams, {"a": a, "b": b}, divisors={"b": 2.0})
        expect = (4 * 1.0 + (2 + 3 * -math.log2(0.75)) / 2.0) / 4
        assert got == pytest.approx(expect, rel=1e-12)

    def test_out_of_range_index(self):
        with pytest.raises(ValidationError):
            entropy_loss({"g": np.array([0, 3])}, {"g": _cb([0.5, 0.5])})

    def test_missing_codebook(self):
        with pytest.raises(ValidationError):
            entropy_loss({"g": np.array([0])}, {})


class TestVqLoss:
    def test_exact_codewords(self):
        cb = _cb([0.5, 0.5])
        idx = np.array([1, 0, 1])
        assert vq_loss({"g": cb.codewords[idx]}, {"g": idx}, {"g": cb}) == 0.0

    def test_single_distance(self):
        cb = EcvqCodebook(np.zeros((1, 3)), np.ones(1), 0.0)
        assert vq_loss({"g": np.array([[2.0, 0, 0]])}, {"g": np.array([0])}, {"g": cb}) == 4.0

    def test_loop_oracle(self):
        rng = np.random.default_rng(1)
        cbs = {g: _cb(np.full(8, 1 / 8), dim=d, seed=i)
               for i, (g, d) in enumerate([("s", 3), ("r", 4)])}
        idx = {g: rng.integers(0, 8, 20) for g in cbs}
        x = {g: rng.normal(size=(20, cbs[g].dim)) for g in cbs}
        expect = sum(np.sum((x[g][i] - cbs[g].codewords[idx[g][i]]) ** 2)
                     for g in cbs for i in range(20)) / 20
        assert vq_loss(x, idx, cbs) == pytest.approx(expect, rel=1e-12)

    def test_misaligned(self):
        cb = _cb([1.0])
        with pytest.raises(ValidationError):
            vq_loss({"g": np.zeros((3, 3))}, {"g": np.zeros(2, int)}, {"g": cb})


class TestRegLoss:
    def test_still_scene(self):
        scene = one_dynamic(np.tile([1.0, 2, 3], (5, 1)))
        assert reg_loss(scene) == 0.0

    def test_single_displacement(self):
        s = StaticGaussians(np.zeros((1, 3)), np.array([[1.0, 0, 0]]), np.zeros((1, 3)),
                            IDENTITY[None], np.ones(1), np.zeros((1, 1, 3)))
        scene = GaussianScene(s, DynamicGaussians.empty(0, 2), 1.0, 1, (0.0,), 0)
        assert reg_loss(scene) == 1.0

    def test_linear_motion_and_steady_spin(self):
        n = 6
        pos = np.outer(np.arange(n), [0.3, -0.1, 0.2])
        rots = axis_angle_quat(np.tile([0.0, 1.0, 0.0], (n, 1)), 0.2 * np.arange(n))
        scene = one_dynamic(pos, rotations=rots)
        assert reg_loss(scene) == pytest.approx(0.0, abs=1e-24)

    def test_oracle(self):
        pos = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 1]])
        scene = one_dynamic(pos)
        acc = [pos[i + 1] - 2 * pos[i] + pos[i - 1] for i in (1, 2)]
        expect = np.mean([np.sum(a ** 2) for a in acc])
        assert reg_loss(scene) == pytest.approx(expect)


class TestTotalLoss:
    def test_hand_filled(self):
        # L_rate = 2 enters through the entropy term
        b = total_loss(0.1, l_entropy=2.0, l_reg=3.0, lambda_r=0.01, lambda_reg=0.1)
        assert b.l_rate == 2.0
        assert b.l_total == pytest.approx(0.42)

    def test_no_weights_is_distortion(self):
        b = total_loss(0.37, 1.0, 2.0, 3.0, 4.0, 5.0, lambda_r=0.0, lambda_reg=0.0,
                       lambda_gs=1.0, lambda_sh=1.0)
        assert b.l_total == 0.37

    def test_zero(self):
        assert total_loss(0.0).l_total == 0.0

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            total_loss(0.1, l_vq=math.nan)
        with pytest.raises(ValidationError):
            total_loss(math.inf)

    @settings(max_examples=50)
    @given(st.lists(st.floats(0, 100), min_size=6, max_size=6),
           st.lists(st.floats(0, 10), min_size=4, max_size=4))
    def test_linear_in_weights(self, parts, w):
        base = dict(zip(("l_dist", "l_gs", "l_sh", "l_entropy", "l_vq", "l_reg"), parts))
        f = [total_loss(**base, lambda_r=r, lambda_reg=w[1], lambda_gs=w[2], lambda_sh=w[3]).l_total
             for r in (0.0, 1.0, 2.0)]
        assert f[2] - f[1] == pytest.approx(f[1] - f[0], rel=1e-9, abs=1e-9)
        g = [total_loss(**base, lambda_r=w[0], lambda_reg=r, lambda_gs=w[2], lambda_sh=w[3]).l_total
             for r in (0.0, 1.0, 2.0)]
        assert g[2] - g[1] == pytest.approx(g[1] - g[0], rel=1e-9, abs=1e-9)

    def test_row_has_every_field(self):
        row = total_loss(0.1, lambda_r=0.5).as_row()
        assert {"l_dist", "l_rate", "l_reg", "l_total", "lambda_dssim"} <= set(row)
