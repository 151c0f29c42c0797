import json

import pytest

from previz.config import ConfigError, PipelineConfig, config_from_dict, load_config


def test_defaults():
    cfg = load_config()
    assert cfg == PipelineConfig()
    assert cfg.backend == "scripted" and cfg.loop.max_rounds == 3 and cfg.loop.max_validation_attempts == 5
    assert cfg.region.tau == 0.5


def test_partial_sections_override_defaults(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"region": {"tau": 0.7}, "loop": {"max_rounds": 2}, "fixture": "fx.json"}))
    cfg = load_config(path)
    assert cfg.region.tau == 0.7 and cfg.region.sigma_b == PipelineConfig().region.sigma_b
    assert cfg.loop.max_rounds == 2
    assert cfg.fixture == str(tmp_path / "fx.json")


def test_absolute_paths_are_kept(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"recording": "/abs/rec.json"}))
    assert load_config(path).recording == "/abs/rec.json"


@pytest.mark.parametrize(
    "data",
    [
        {"backend": "oracle"},
        {"cell_size": 0},
        {"character_radius": -1},
        {"region": {"nope": 1}},
        {"unknown": True},
    ],
)
def test_bad_settings_raise(data):
    with pytest.raises((ConfigError, ValueError)):
        config_from_dict(data)


def test_unreadable_or_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)
    bad.write_text("[]")
    with pytest.raises(ConfigError, match="object"):
        load_config(bad)
