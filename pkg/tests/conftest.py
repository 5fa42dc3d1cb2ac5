from __future__ import annotations

import pytest

from personamem import Engine, EngineConfig, MockGateway, tick_clock


@pytest.fixture
def gateway() -> MockGateway:
    return MockGateway()


@pytest.fixture
def config(tmp_path) -> EngineConfig:
    return EngineConfig(storage_root=str(tmp_path / "data"))


@pytest.fixture
def engine(config) -> Engine:
    return Engine(config, clock=tick_clock())


@pytest.fixture
def engine_factory(tmp_path):
    """Build engines sharing one storage root (cross-restart scenarios)."""

    def _make(clock_start: int = 1_700_000_000_000, **config_overrides) -> Engine:
        cfg = EngineConfig(storage_root=str(tmp_path / "data"), **config_overrides)
        return Engine(cfg, clock=tick_clock(clock_start))

    return _make
