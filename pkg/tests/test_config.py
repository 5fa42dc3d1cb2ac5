from __future__ import annotations

import json

import pytest

from personamem import EngineConfig


def test_defaults_are_spec_values():
    config = EngineConfig()
    assert config.stm_capacity == 12
    assert config.memory_max_chars == 400
    assert config.k_direct == 5
    assert config.k_total == 15
    assert config.max_refinement_rounds == 2
    assert config.call_budget == 40
    assert config.embedding_dim == 256
    assert config.tag_overlap_bonus == 0.0
    assert config.pipeline_mode == "agentic"


def test_load_from_file_with_overrides(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps(
            {
                "storage_root": "/srv/pm",
                "stm_capacity": 8,
                "live": {"base_url": "https://llm.example", "model": "m1"},
            }
        ),
        encoding="utf-8",
    )
    config = EngineConfig.load(path, k_direct=3)
    assert config.storage_root == "/srv/pm"
    assert config.stm_capacity == 8
    assert config.k_direct == 3
    assert config.live.base_url == "https://llm.example"
    assert config.live.model == "m1"


def test_env_overrides_live_settings(tmp_path, monkeypatch):
    monkeypatch.setenv("PERSONAMEM_API_KEY", "secret")
    monkeypatch.setenv("PERSONAMEM_MODEL", "env-model")
    config = EngineConfig.load(None)
    assert config.live.api_key == "secret"
    assert config.live.model == "env-model"


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{"surprise": 1}', encoding="utf-8")
    with pytest.raises(ValueError):
        EngineConfig.load(path)


def test_invalid_values_rejected():
    with pytest.raises(ValueError):
        EngineConfig(pipeline_mode="turbo")
    with pytest.raises(ValueError):
        EngineConfig(max_refinement_rounds=0)
    with pytest.raises(ValueError):
        EngineConfig(k_direct=9, k_total=3)
