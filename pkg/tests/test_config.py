import json

import pytest

from icpm.config import ExperimentConfig, config_hash, load_config
from icpm.exceptions import ConfigError


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.model == "cart-pendulum"
    assert cfg.impulse.mode == "jump" and cfg.tolerances.rtol == 1e-10


def test_unknown_keys_rejected(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"tolerances": {"rtol": 1e-8, "nope": 1}}))
    with pytest.raises(ConfigError):
        load_config(p)


def test_nonpositive_tolerance_rejected():
    with pytest.raises(ConfigError):
        load_config(None, {"tolerances.atol": 0.0})


def test_overrides_and_hash(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"model": "tiptoebot", "impulse": {"mu": 1e-4}}))
    cfg = load_config(p, {"impulse.mode": "high-gain", "params.beta1": 4.0})
    assert cfg.impulse.mu == 1e-4 and cfg.impulse.mode == "high-gain"
    assert cfg.model_params() == {"beta1": 4.0}
    assert config_hash(cfg) == config_hash(load_config(p, {"impulse.mode": "high-gain", "params.beta1": 4.0}))
    assert config_hash(cfg) != config_hash(load_config(p))


def test_vhc_override_maps_to_params():
    cfg = load_config(None, {"model": "tiptoebot", "vhc.coefficients": [-1.5, 0.2], "vhc.kd": 0.3})
    assert cfg.model_params() == {"A1": -1.5, "A2": 0.2, "kd": 0.3}
    cfg = load_config(None, {"vhc.coefficients": [1.2]})
    assert cfg.model_params() == {"vhc_amplitude": 1.2}
    with pytest.raises(ConfigError):
        load_config(None, {"vhc.coefficients": [1.0, 2.0]}).model_params()


def test_anchor_and_energy_exclusive():
    with pytest.raises(ConfigError):
        load_config(None, {"orbit.anchor": [0, 1], "orbit.c_d": 1.0})


def test_malformed_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
