"""Engine configuration: one dataclass, JSON file + environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

PIPELINE_MODES = ("agentic", "rag_baseline")


@dataclass
class LiveBackendConfig:
    """Chat-completions-style HTTP endpoint settings (live mode only)."""

    base_url: str = ""
    api_key: str = ""
    model: str = "gpt-4o"
    embedding_model: str = "text-embedding-3-small"
    timeout_ms: int = 30000

    @classmethod
    def from_env(cls, base: "LiveBackendConfig | None" = None) -> "LiveBackendConfig":
        cfg = base or cls()
        return cls(
            base_url=os.environ.get("PERSONAMEM_BASE_URL", cfg.base_url),
            api_key=os.environ.get("PERSONAMEM_API_KEY", cfg.api_key),
            model=os.environ.get("PERSONAMEM_MODEL", cfg.model),
            embedding_model=os.environ.get("PERSONAMEM_EMBED_MODEL", cfg.embedding_model),
            timeout_ms=int(os.environ.get("PERSONAMEM_TIMEOUT_MS", cfg.timeout_ms)),
        )


@dataclass
class EngineConfig:
    storage_root: str = "./data"
    gateway: str = "mock"  # mock | live
    live: LiveBackendConfig = field(default_factory=LiveBackendConfig)

    embedding_dim: int = 256
    stm_capacity: int = 12  # turns (6 exchanges)
    memory_max_chars: int = 400
    summary_max_topics: int = 6

    k_direct: int = 5
    k_total: int = 15
    tag_overlap_bonus: float = 0.0  # off by default; additive rank bonus per shared tag

    # per-source evidence character budgets
    budget_ltm_chars: int = 2000
    budget_summaries_chars: int = 1000
    budget_stm_chars: int = 2000
    budget_profile_chars: int = 800
    budget_web_chars: int = 800

    pipeline_mode: str = "agentic"  # agentic | rag_baseline
    max_refinement_rounds: int = 2
    call_budget: int = 40  # generate calls per turn
    ablate_coordinator: bool = False
    ablate_self_validator: bool = False
    ablate_user_profile: bool = False

    stm_digest_turns: int = 6

    server_host: str = "127.0.0.1"
    server_port: int = 8700

    def __post_init__(self) -> None:
        if self.pipeline_mode not in PIPELINE_MODES:
            raise ValueError(f"unknown pipeline mode: {self.pipeline_mode!r}")
        if self.max_refinement_rounds < 1:
            raise ValueError("max_refinement_rounds must be >= 1")
        if self.k_direct < 1 or self.k_total < self.k_direct:
            raise ValueError("need k_direct >= 1 and k_total >= k_direct")

    @property
    def storage_path(self) -> Path:
        return Path(self.storage_root)

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides) -> "EngineConfig":
        """Build config from an optional JSON file, then env, then overrides."""
        data: dict = {}
        if path is not None:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        live_data = data.pop("live", {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.update(overrides)
        cfg = cls(**data)
        cfg.live = LiveBackendConfig.from_env(LiveBackendConfig(**live_data))
        return cfg

    def ablation_flags(self) -> dict[str, bool]:
        return {
            "coordinator": self.ablate_coordinator,
            "self_validator": self.ablate_self_validator,
            "user_profile": self.ablate_user_profile,
        }
