"""
Tests for configuration loading and precedence
"""
import json

import pytest

from lpt.config import EvalConfig, RunConfig, TrainerConfig, load_config_file, merge_sections, seed_from_env
from lpt.errors import ConfigError


def test_precedence():
    """flag > config file > default; None flags do not override"""
    merged = merge_sections({"iterations": 10, "batch_size": 4}, {"iterations": 20}, {"iterations": None})
    assert merged == {"iterations": 20, "batch_size": 4}
    assert merge_sections({}, {"iterations": 20}, {"iterations": 30}) == {"iterations": 30}


def test_load_config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 3, "trainer": {"iterations": 5}}))
    assert load_config_file(path)["trainer"] == {"iterations": 5}
    assert load_config_file(None) == {}

    path.write_text(json.dumps({"optimizer": {}}))
    with pytest.raises(ConfigError):
        load_config_file(path)
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config_file(path)
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "absent.json")


def test_seed_from_env(monkeypatch):
    monkeypatch.setenv("LPT_SEED", "7")
    assert seed_from_env() == 7
    monkeypatch.setenv("LPT_SEED", "seven")
    with pytest.raises(ConfigError):
        seed_from_env()
    monkeypatch.delenv("LPT_SEED")
    assert seed_from_env(default=1) == 1


def test_sampler_default_follows_pmc():
    assert TrainerConfig().sampler.num_steps == 2
    assert TrainerConfig(pmc_enabled=False).sampler.num_steps == 15


def test_nested_sections_merge_key_by_key():
    """A sampler flag overrides one field and keeps the file's other fields"""
    file_values = {"sampler": {"step_size": 0.2, "num_steps": 7}, "grad_clip": None}
    flags = {"sampler": {"step_size": None, "num_steps": 3}, "optimizer": None}
    merged = merge_sections({}, file_values, flags)
    assert merged == {"sampler": {"step_size": 0.2, "num_steps": 3}, "grad_clip": None}
    assert merge_sections({}, {}, {"sampler": {"step_size": None, "num_steps": None}}) == {}


def test_partial_sampler_keeps_pmc_step_default():
    assert TrainerConfig(sampler={"step_size": 0.1}).sampler.num_steps == 2
    cfg = TrainerConfig(pmc_enabled=False, sampler={"step_size": 0.1})
    assert (cfg.sampler.step_size, cfg.sampler.num_steps) == (0.1, 15)


def test_invalid_values_are_all_reported():
    with pytest.raises(ConfigError) as info:
        TrainerConfig.build(iterations=0, batch_size=-1)
    assert len(info.value.problems) == 2
    with pytest.raises(ConfigError):
        EvalConfig.build(guidance_weights=(-1.0,))


def test_run_config_requires_seed_and_paths(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.build(command="gen-data", env_id="gridmaze-v0")
    with pytest.raises(ConfigError):
        RunConfig.build(command="train", dataset_path=tmp_path / "absent.jsonl", seed=0)
