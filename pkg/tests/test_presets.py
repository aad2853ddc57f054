import pytest

from g4c.errors import ValidationError
from g4c.presets import LAMBDA_GS, LAMBDA_SH, LEVELS, LevelPreset, level_preset, read_config
from g4c.quant import QuantPolicy


def test_schedules():
    assert LAMBDA_GS == (0.05, 0.02, 0.01, 0.005, 0.002, 0.0005)
    assert LAMBDA_SH == (0.5, 0.2, 0.1, 0.05, 0.02, 0.005)
    assert level_preset(1).lambda_gs == 0.05
    assert level_preset(6).lambda_sh == 0.005
    for a, b in zip(LEVELS, LEVELS[1:]):
        assert level_preset(a).lambda_gs > level_preset(b).lambda_gs
        assert level_preset(a).lambda_sh > level_preset(b).lambda_sh


def test_defaults():
    p = level_preset(3)
    assert p.wavelet_levels == 1 and p.keep_levels == 0
    assert p.codebook_size == 256
    assert "variances" not in p.policy
    assert set(p.policy.attributes) == {"static_opacity", "dynamic_opacity", "centers"}


@pytest.mark.parametrize("level", [0, 7, -1])
def test_bad_level(level):
    with pytest.raises(ValidationError):
        level_preset(level)


@pytest.mark.parametrize("kw", [dict(lambda_r=-1.0), dict(wavelet_levels=9),
                                dict(wavelet_levels=1, keep_levels=2), dict(codebook_size=0),
                                dict(traj_step=0.0), dict(ecvq_iters=0), dict(vq_weight=-0.1)])
def test_invalid_overrides(kw):
    with pytest.raises(ValidationError):
        level_preset(2, **kw)


def test_overrides_replace_fields_and_ignore_none():
    p = level_preset(2, lambda_r=0.25, codebook_size=None)
    assert p.lambda_r == 0.25 and p.codebook_size == 256
    assert p.lambda_gs == LAMBDA_GS[1]


def test_variance_quantization_needs_the_ablation_flag():
    with pytest.raises(ValidationError):
        QuantPolicy(("variances",))
    assert "variances" in QuantPolicy(("variances",), allow_variances=True)
    with pytest.raises(ValidationError):
        QuantPolicy(("alpha",))


def test_config_file(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[preset]\nlambda_r = 0.5\ncodebook_size = 64\nwavelet_levels = 2\n"
                    "quantize = static_opacity, centers\n")
    over = read_config(path)
    assert over["lambda_r"] == 0.5 and over["codebook_size"] == 64
    p = level_preset(4, **over)
    assert p.wavelet_levels == 2 and p.policy.attributes == ("static_opacity", "centers")
    path.write_text("[preset]\nquantize = none\n")
    assert read_config(path)["policy"].attributes == ()


@pytest.mark.parametrize("text", ["[preset]\nbogus = 1\n", "[other]\nlambda_r = 1\n",
                                  "[preset]\ncodebook_size = many\n", "not ini at all"])
def test_bad_config_files(tmp_path, text):
    path = tmp_path / "c.ini"
    path.write_text(text)
    with pytest.raises(ValidationError):
        read_config(path)


def test_preset_is_immutable():
    p = LevelPreset()
    with pytest.raises(Exception):
        p.level = 3
