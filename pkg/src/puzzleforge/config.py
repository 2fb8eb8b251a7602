"""Flat key=value configuration with CLI override semantics."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

from .rewards import RewardThresholds


def load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


@dataclass
class Settings:
    seed: int = 0
    store_path: str = "candidates.jsonl"
    corpus_path: str = "corpus.jsonl"
    model_path: str = "model.json.gz"
    strong_engine: Optional[str] = None
    weak_engine: Optional[str] = None
    depth_strong: int = 12
    depth_weak: int = 4
    hash_mb: int = 128
    workers: int = 1
    win_cp: int = 200
    second_max_cp: int = 100
    gap_cp: int = 200
    novelty_threshold: float = 0.85
    per_theme: int = 50
    verify_plies: int = 0
    port: int = 8787
    extra: dict[str, str] = field(default_factory=dict)

    _INT_KEYS = (
        "seed",
        "depth_strong",
        "depth_weak",
        "hash_mb",
        "workers",
        "win_cp",
        "second_max_cp",
        "gap_cp",
        "per_theme",
        "verify_plies",
        "port",
    )

    @classmethod
    def from_sources(
        cls, config_path: Optional[str] = None, overrides: Optional[dict] = None
    ) -> "Settings":
        settings = cls()
        file_values = load_config_file(config_path) if config_path else {}
        for key, value in file_values.items():
            settings._set(key, value)
        for key, value in (overrides or {}).items():
            if value is not None:
                settings._set(key, value)
        if settings.strong_engine is None:
            settings.strong_engine = os.environ.get("STRONG_ENGINE")
        if settings.weak_engine is None:
            settings.weak_engine = os.environ.get("WEAK_ENGINE")
        return settings

    def _set(self, key: str, value) -> None:
        if key in self._INT_KEYS:
            setattr(self, key, int(value))
        elif key == "novelty_threshold":
            self.novelty_threshold = float(value)
        elif hasattr(self, key) and not key.startswith("_"):
            setattr(self, key, value)
        else:
            self.extra[key] = str(value)

    def thresholds(self) -> RewardThresholds:
        return RewardThresholds(
            win_cp=self.win_cp,
            second_max_cp=self.second_max_cp,
            gap_cp=self.gap_cp,
            weak_depth=self.depth_weak,
        )
