import json

import pytest

from modewarp.config import DEFAULTS, ConfigError, RunConfig


def test_defaults_are_valid():
    cfg = RunConfig.load()
    assert cfg.waveguide().water_depth == DEFAULTS["environment"]["water_depth"]
    assert cfg.scenario().range == 200e3


def test_overrides_win(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"scenario": {"range_m": 300e3, "receiver_depth": 60.0}}))
    cfg = RunConfig.load(p, {"scenario.range_m": 400e3})
    assert cfg.scenario().range == 400e3
    assert cfg.scenario().receiver_depth == 60.0


def test_problems_are_aggregated(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({
        "environment": {"ssp": {"csv": "missing.csv"}},
        "scenario": {"source_depth": -1},
        "analysis": {"band": [50, 10]},
    }))
    with pytest.raises(ConfigError) as e:
        RunConfig.load(p)
    msg = str(e.value)
    assert len(e.value.problems) >= 3
    assert "missing.csv" in msg and "source_depth" in msg and "band" in msg


def test_unknown_key_and_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.load(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.load(p)
    with pytest.raises(ConfigError, match="not found"):
        RunConfig.load(tmp_path / "nope.json")


def test_relative_paths_resolve_against_config(tmp_path):
    (tmp_path / "p.csv").write_text("depth_m,speed_mps\n0,1500\n2000,1510\n")
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"environment": {"ssp": {"csv": "p.csv"}}}))
    cfg = RunConfig.load(p)
    assert cfg.waveguide().ssp.speeds[-1] == 1510.0


def test_hash_ignores_output_dir_only():
    a = RunConfig.load(overrides={"output_dir": "x"})
    b = RunConfig.load(overrides={"output_dir": "y"})
    c = RunConfig.load(overrides={"scenario.range_m": 100e3})
    assert a.config_hash == b.config_hash != c.config_hash
    assert len(a.config_hash) == 16


def test_inline_dual_channel_and_transect(tmp_path):
    cfg = RunConfig.load(overrides={
        "environment.ssp": {"dual_channel": {
            "surface_speed": 1440.0, "surface_gradient": 0.01, "duct1_depth": 50.0, "duct2_depth": 300.0,
            "duct1_strength": 5.0, "duct2_strength": 5.0, "duct_width1": 20.0, "duct_width2": 60.0}},
        "transect": "fixture",
    })
    assert len(cfg.waveguide().ssp.local_minima()) == 2
    assert cfg.transect() is not None
