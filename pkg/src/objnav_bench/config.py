"""Knob dataclasses for sensing, clustering, planning, episodes and the LLM oracle."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

RESOLUTION_M = 0.05
FORWARD_M = 0.20
TURN_DEG = 30
SUCCESS_RADIUS_M = 0.25
MAX_STEPS = 500


@dataclass(frozen=True)
class SensorConfig:
    fov_deg: float = 90.0
    n_rays: int = 120
    max_range_m: float = 5.0


@dataclass(frozen=True)
class ClusterConfig:
    eps_m: float = 1.0
    min_samples: int = 1
    attach_radius_m: float = 2.0


@dataclass(frozen=True)
class PlannerConfig:
    c_min: float = 0.05
    # obstacle inflation applied to the belief grid before A*; keeps the point
    # agent's heading slop from clipping wall corners
    inflate_m: float = 0.10
    waypoint_spacing_cells: int = 4


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = MAX_STEPS
    success_radius_m: float = SUCCESS_RADIUS_M
    dwfe_aggregate: str = "sum"
    eta: float = 1.0
    k_votes: int = 5
    trajectory_penalty: bool = False
    trajectory_lambda: float = 0.1
    trajectory_radius_m: float = 0.3
    arrive_radius_m: float = 0.25
    blacklist_radius_m: float = 0.5
    stall_steps: int = 24
    memoize_votes: bool = True
    # cells eligible as exploration targets: "frontier" or "navigable" (all believed-free);
    # with "navigable" the summed field peaks inside explored space and the agent stalls
    target_set: str = "frontier"

    def __post_init__(self):
        if self.target_set not in ("frontier", "navigable"):
            raise ValueError(f"target_set must be 'frontier' or 'navigable', not {self.target_set!r}")
        if self.dwfe_aggregate not in ("sum", "max"):
            raise ValueError(f"dwfe_aggregate must be 'sum' or 'max', not {self.dwfe_aggregate!r}")


@dataclass(frozen=True)
class LLMConfig:
    endpoint: str = "http://localhost:8000/v1/chat/completions"
    model: str = "gpt-4.1"
    temperature: float = 0.0
    timeout_s: float = 30.0
    retries: int = 2
    api_key_env: str = "OBJNAV_LLM_API_KEY"
    transcript_dir: str | None = None


@dataclass(frozen=True)
class BenchConfig:
    sensor: SensorConfig = field(default_factory=SensorConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    llm: LLMConfig = field(default_factory=LLMConfig)
    # "stub" (offline co-occurrence), "random" or "llm"
    oracle: str = "stub"

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BenchConfig":
        sections = {"sensor": SensorConfig, "cluster": ClusterConfig, "planner": PlannerConfig,
                    "episode": EpisodeConfig, "llm": LLMConfig}
        if "api_key" in data.get("llm", {}):
            raise ValueError("LLM credentials are read from the environment only")
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key in sections:
                kwargs[key] = sections[key](**value)
            elif key == "oracle":
                kwargs[key] = value
            else:
                raise ValueError(f"unknown config section {key!r}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "BenchConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
