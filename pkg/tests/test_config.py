from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kfspoof import config as cfgmod
from kfspoof import presets
from kfspoof.config import ConfigError, ExperimentConfig

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vec2 = st.tuples(finite, finite)
positive = st.floats(1e-3, 1e3)


@st.composite
def configs(draw):
    T = draw(st.integers(1, 12))
    d = tuple(draw(st.lists(st.one_of(st.just(0.0), positive), min_size=T, max_size=T)))
    diag = lambda a, b: ((a, 0.0), (0.0, b))
    return replace(
        ExperimentConfig(),
        experiment_id=draw(st.text("abcxyz_-0123", min_size=1, max_size=10)),
        seed=draw(st.integers(0, 2**64 - 1)),
        trials=draw(st.integers(1, 500)),
        F=((draw(finite), draw(finite)), (draw(finite), draw(finite))),
        R=diag(draw(positive), draw(positive)),
        u=draw(vec2),
        clean_mean=draw(vec2),
        clean_mean_cov=draw(st.one_of(st.none(), st.builds(diag, positive, positive))),
        guess_mean=draw(st.one_of(st.none(), vec2)),
        horizon=T, d=d, steps=T,
        gamma=draw(st.one_of(st.none(), st.lists(positive, min_size=T, max_size=T).map(tuple))),
        m0_bias=draw(st.one_of(st.none(), vec2)),
        window=draw(st.one_of(st.none(), st.integers(0, 20))),
        threshold=draw(st.one_of(st.none(), positive)),
        statistic_form=draw(st.sampled_from(["literal", "normalized_innovation"])),
    )


@given(configs())
def test_round_trip_is_lossless(cfg):
    assert cfgmod.loads(cfgmod.dumps(cfg)) == cfg


@pytest.mark.parametrize("name", sorted(presets.PRESETS))
def test_presets_round_trip_and_validate(name):
    cfg = presets.get(name)
    cfgmod.validate(cfg)
    assert cfgmod.loads(cfgmod.dumps(cfg)) == cfg


def test_file_round_trip(tmp_path):
    path = tmp_path / "exp.ini"
    cfgmod.save(presets.get("fig8"), str(path))
    assert cfgmod.load(str(path)) == presets.get("fig8")


def test_unknown_keys_and_sections_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        cfgmod.loads("[system]\nFF = 1 0; 0 1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        cfgmod.loads("[plotting]\ncolor = red\n")


def test_malformed_values_rejected():
    for text in ("[system]\nF = 1 0; 0\n", "[experiment]\ntrials = many\n",
                 "[spec]\nhorizon = 3\nd = 4:1.0\n", "[spec]\nd = 2=1.0\n",
                 "[experiment]\ntrials = 0\n", "[detector]\nbasis = sometimes\n",
                 "[system]\nR = 1 2; 3 4\n", "no section header\n"):
        with pytest.raises(ConfigError):
            cfgmod.loads(text)


def test_overlay_on_preset():
    cfg = cfgmod.loads("[spec]\nd = 2:1.5\n[experiment]\nseed = 9\n", presets.get("fig4"))
    assert cfg.seed == 9 and cfg.d == (0.0, 1.5, 0.0, 0.0, 0.0, 0.0)
    assert cfg.clean_mean_cov == presets.get("fig4").clean_mean_cov
    # changing the horizon keeps the sparse profile
    longer = cfgmod.loads("[spec]\nhorizon = 8\n", cfg)
    assert longer.d == (0.0, 1.5) + (0.0,) * 6


def test_optional_fields_accept_none():
    cfg = cfgmod.loads("[spec]\nm0_bias = none\nwindow =\n", presets.get("fig5"))
    assert cfg.m0_bias is None and cfg.window is None


def test_builders(model):
    cfg = presets.get("fig5")
    assert np.array_equal(cfg.system().F, model.F)
    assert cfg.spec().horizon == 15
    guess = cfg.attacker_guess()
    assert np.array_equal(guess.mean, [1.0, 1.0]) and np.array_equal(guess.cov, np.eye(2))
    assert presets.get("fig3a").attacker_guess() is None
    assert cfg.scenario(seed=4).seed == 4
    assert cfg.with_profile([1.0, 2.0]).horizon == 2
    with pytest.raises(KeyError):
        presets.get("fig99")


def test_reference_parameter_sets():
    ramp = presets.get("fig3b").d
    assert ramp[:2] == (0.0, 0.0) and ramp[2] == pytest.approx(0.25 * np.sqrt(2) * 3)
    a = presets.get("fig3a")
    assert (a.d[4], a.d[9], a.d[14]) == (1.77, 3.54, 5.30) and a.horizon == 20
    p2 = presets.get("fig4")
    assert p2.attacker_cov == ((1.5, 0.0), (0.0, 1.5)) and p2.d[0] == 2.0 and p2.horizon == 6
    assert presets.get("fig9").d[29] == pytest.approx(3.0)
    assert presets.get("abrupt").d == (0.0, 0.0, 0.0, 0.0, 3.0)
