import os

import pytest

from fqlems import config as cfg


def test_defaults_build():
    rc = cfg.build_run_config()
    assert rc.train.cycle == "udds"
    assert rc.train.episodes == 1000
    assert rc.env.soc_ref == 0.5
    assert rc.agent.alpha == 0.005


def test_parse_rejects_unknown_key():
    with pytest.raises(cfg.ConfigError):
        cfg.parse_config_text("nope.bogus = 1")


def test_parse_rejects_duplicate_key():
    with pytest.raises(cfg.ConfigError):
        cfg.parse_config_text("train.seed = 1\ntrain.seed = 2")


def test_parse_rejects_malformed_line():
    with pytest.raises(cfg.ConfigError):
        cfg.parse_config_text("train.seed 5")


def test_parse_comments_and_blanks():
    raw = cfg.parse_config_text("# comment\n\ntrain.seed = 5 # inline\n")
    assert raw == {"train.seed": "5"}


def test_file_and_override_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("train.seed = 10\ntrain.episodes = 50\n")
    rc = cfg.build_run_config(file_path=path, overrides={"train.seed": 99})
    assert rc.train.seed == 99
    assert rc.train.episodes == 50


def test_missing_file_is_config_error():
    with pytest.raises(cfg.ConfigError):
        cfg.build_run_config(file_path="/no/such/file.cfg")


def test_env_seed_fallback(monkeypatch):
    monkeypatch.setenv(cfg.SEED_ENV_VAR, "77")
    assert cfg.build_run_config().train.seed == 77
    # explicit settings beat the environment
    assert cfg.build_run_config(overrides={"train.seed": 5}).train.seed == 5


def test_validation_routed_to_config_error():
    with pytest.raises(cfg.ConfigError):
        cfg.build_run_config(overrides={"agent.alpha": "2.0"})
    with pytest.raises(cfg.ConfigError):
        cfg.build_run_config(overrides={"env.hydrogen_mode": "magic"})
    with pytest.raises(cfg.ConfigError):
        cfg.build_run_config(overrides={"train.episodes": "2.5"})


def test_soc_bounds_assembly():
    rc = cfg.build_run_config(overrides={"env.soc_min": 0.1, "env.soc_max": 0.9})
    assert rc.env.soc_bounds == (0.1, 0.9)


def test_battery_inline_table():
    rc = cfg.build_run_config(overrides={
        "battery.soc_grid": "0.0,1.0",
        "battery.voc_v": "240.0,240.0",
        "battery.rbat_ohm": "0.2,0.2",
    })
    assert rc.battery.voc_at(0.5) == 240.0
    assert rc.battery.rbat_at(0.5) == 0.2


def test_battery_csv_excludes_inline(tmp_path):
    path = tmp_path / "bat.csv"
    path.write_text("soc,voc_v,rbat_ohm\n0.0,230.0,0.15\n1.0,260.0,0.15\n")
    rc = cfg.build_run_config(overrides={"battery.table_csv": str(path)})
    assert rc.battery.voc_at(0.5) == pytest.approx(245.0)
    with pytest.raises(cfg.ConfigError):
        cfg.build_run_config(overrides={
            "battery.table_csv": str(path),
            "battery.soc_grid": "0.0,1.0",
        })


def test_resolved_snapshot_round_trip():
    rc = cfg.build_run_config(overrides={"train.seed": 4, "vehicle.mass": 2600})
    text = cfg.resolved_text(rc)
    back = cfg.build_run_config(overrides=cfg.parse_config_text(text))
    assert cfg.resolved_text(back) == text
    assert back.train.seed == 4
    assert back.vehicle.mass == 2600


def test_write_resolved(tmp_path):
    rc = cfg.build_run_config()
    path = tmp_path / "resolved.cfg"
    cfg.write_resolved(rc, path)
    again = cfg.build_run_config(file_path=path)
    assert cfg.resolved_text(again) == cfg.resolved_text(rc)


def test_boolean_parsing():
    rc = cfg.build_run_config(overrides={"train.literal_epsilon": "true"})
    assert rc.train.literal_epsilon is True
    with pytest.raises(cfg.ConfigError):
        cfg.build_run_config(overrides={"train.literal_epsilon": "maybe"})
