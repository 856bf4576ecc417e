"""Run configuration: defaults, overridden by a flat TOML file, overridden by flags."""

from __future__ import annotations

import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from kgrag.reasoning import FeedbackMode, LoopConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    max_len: int = 512
    overlap: int = 64
    beam_width: int = 3
    max_depth: int = 3
    seed_k: int = 3
    dedup_threshold: float = 0.2
    enrich_k: int = 5
    i_max: int = 20
    stall_rounds: int = 2
    feedback_mode: str = FeedbackMode.QUERY_DRIVEN.value
    scorer: str = "auto"
    transport: str = "live"
    replay: str | None = None
    record: str | None = None
    embedder: str = "auto"
    embed_dim: int = 256
    embed_seed: int = 0
    embedding_cache: str | None = None
    workers: int = 1
    graph_mode: str = "shared"

    def validate(self) -> RunConfig:
        for name in ("max_len", "beam_width", "max_depth", "seed_k", "enrich_k", "i_max", "stall_rounds", "embed_dim", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if not 0 <= self.overlap < self.max_len:
            raise ConfigError(f"overlap must satisfy 0 <= overlap < max_len ({self.overlap}, {self.max_len})")
        if not 0 <= self.dedup_threshold <= 1:
            raise ConfigError("dedup_threshold must lie in [0, 1]")
        if self.feedback_mode not in {m.value for m in FeedbackMode}:
            raise ConfigError(f"unknown feedback_mode {self.feedback_mode!r}")
        if self.transport not in ("live", "replay"):
            raise ConfigError(f"transport must be live or replay, got {self.transport!r}")
        if self.transport == "replay" and not self.replay:
            raise ConfigError("replay transport needs a fixture path (--replay)")
        if self.embedder not in ("auto", "mock", "openai"):
            raise ConfigError(f"unknown embedder {self.embedder!r}")
        if self.graph_mode not in ("shared", "per_question"):
            raise ConfigError(f"graph_mode must be shared or per_question, got {self.graph_mode!r}")
        if self.scorer not in ("auto", "embedding", "llm"):
            raise ConfigError(f"unknown scorer {self.scorer!r}")
        return self

    def loop_config(self) -> LoopConfig:
        return LoopConfig(
            i_max=self.i_max,
            feedback_mode=FeedbackMode(self.feedback_mode),
            beam_width=self.beam_width,
            max_depth=self.max_depth,
            seed_k=self.seed_k,
            enrich_k=self.enrich_k,
            dedup_threshold=self.dedup_threshold,
            stall_rounds=self.stall_rounds,
            scorer=self.scorer,
        )


FIELD_NAMES = {f.name for f in fields(RunConfig)}
_SECRET_KEYS = {"api_key", "key", "token", "password", "secret"}


def load_config_file(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    for key, value in data.items():
        if key in _SECRET_KEYS:
            raise ConfigError(f"{key!r} is not allowed in config files; use environment variables")
        if key not in FIELD_NAMES:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, dict):
            raise ConfigError(f"config must be flat; {key!r} is a table")
    return data


def resolve_config(flags: Mapping[str, Any] | None = None, config_path: str | Path | None = None) -> RunConfig:
    """Defaults < config file < flags. ``None`` flag values count as unset."""
    merged: dict[str, Any] = dict(load_config_file(config_path)) if config_path is not None else {}
    merged.update({k: v for k, v in (flags or {}).items() if k in FIELD_NAMES and v is not None})
    if merged.get("replay") and "transport" not in merged:
        merged["transport"] = "replay"
    try:
        cfg = replace(RunConfig(), **merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        return cfg.validate()
    except TypeError as exc:
        raise ConfigError(f"config value has the wrong type: {exc}") from exc
