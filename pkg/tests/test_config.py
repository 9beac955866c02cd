from pathlib import Path

import pytest

from dcrs.config import ExperimentConfig, config_from_mapping, load_config
from dcrs.errors import ConfigError

MINIMAL = {"scenario": "t", "m": 1, "n_rx": 1, "t": 4, "master_seed": 1}


def test_minimal_defaults():
    cfg = config_from_mapping(MINIMAL)
    assert cfg.trials == 20_000
    assert cfg.n_rs_slots == 4 and cfg.n_data_slots == 10
    assert cfg.kappa == 1.0
    assert cfg.estimator == "dcrs" and cfg.est_mode == "ZF"


def test_snr_grid_inclusive():
    cfg = config_from_mapping(
        dict(MINIMAL, snr={"start": -20.0, "stop": 40.0, "step": 5.0})
    )
    grid = cfg.snr_grid
    assert grid[0] == -20.0 and grid[-1] == 40.0 and len(grid) == 13


def test_seed_is_mandatory():
    with pytest.raises(ConfigError):
        config_from_mapping({k: v for k, v in MINIMAL.items()
                             if k != "master_seed"})


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        config_from_mapping(dict(MINIMAL, snr_grid=[0.0]))


@pytest.mark.parametrize("patch", [
    {"m": 0}, {"t": 1, "m": 2}, {"trials": 0},
    {"snr": {"start": 10.0, "stop": 0.0}},
    {"snr": {"step": -1.0}},
    {"estimator": {"kind": "blind"}},
    {"estimator": {"kind": "dcrs", "mode": "LS"}},
    {"beta_source": "oracle"},
    {"master_seed": "now"},
])
def test_invalid_values_rejected(patch):
    with pytest.raises(ConfigError):
        config_from_mapping(dict(MINIMAL, **patch))


def test_digest_changes_with_content():
    a = config_from_mapping(MINIMAL)
    b = config_from_mapping(dict(MINIMAL, trials=999))
    assert a.digest() == config_from_mapping(MINIMAL).digest()
    assert a.digest() != b.digest()


def test_replace_override():
    cfg = config_from_mapping(MINIMAL)
    out = cfg.replace(master_seed=42, trials=10)
    assert out.master_seed == 42 and out.trials == 10
    assert cfg.master_seed == 1


def test_yaml_roundtrip(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(
        "scenario: demo\nm: 1\nn_rx: 1\nt: 4\nmaster_seed: 7\n"
        "snr: {start: 0.0, stop: 10.0, step: 5.0}\n"
        "estimator: {kind: training, mode: MMSE}\n"
    )
    cfg = load_config(p)
    assert cfg.scenario == "demo"
    assert cfg.estimator == "training" and cfg.est_mode == "MMSE"
    assert cfg.snr_grid == [0.0, 5.0, 10.0]


def test_load_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.yaml")


def test_shipped_configs_parse():
    here = Path(__file__).resolve().parent.parent / "configs"
    files = sorted(here.glob("*.yaml"))
    assert len(files) >= 5
    for f in files:
        cfg = load_config(f)
        assert isinstance(cfg, ExperimentConfig)
        assert cfg.snr_grid
