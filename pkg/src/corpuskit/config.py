"""Application configuration: one JSON file, environment-variable overrides
for provider settings, and flag overrides on top (flags > env > file >
defaults)."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError, InvalidWeights
from .fusion import DEFAULT_CAP, DEFAULT_POOL_SIZE, DEFAULT_TAU, Weights
from .lexindex import Bm25Params
from .ragkit import DEFAULT_BUDGET_TOKENS, GeneratorSpec
from .vecindex import DEFAULT_DIM, EmbedderSpec

ENV_CONFIG = "CORPUSKIT_CONFIG"
ENV_ENDPOINT = "CORPUSKIT_PROVIDER_ENDPOINT"
ENV_API_KEY = "CORPUSKIT_PROVIDER_KEY"


@dataclass
class AppConfig:
    store_path: str = "store"
    weights: Weights = field(default_factory=Weights)
    bm25: Bm25Params = field(default_factory=Bm25Params)
    embedder: EmbedderSpec = field(default_factory=EmbedderSpec)
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    pool_size: int = DEFAULT_POOL_SIZE
    cap: int = DEFAULT_CAP
    tau: float = DEFAULT_TAU
    budget: int = DEFAULT_BUDGET_TOKENS
    review_mode: str = "interactive"

    def validate(self) -> None:
        if self.pool_size < 1:
            raise ConfigError("pool_size: must be >= 1")
        if self.cap < 1:
            raise ConfigError("cap: must be >= 1")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError("tau: must be in (0, 1]")
        if self.budget < 1:
            raise ConfigError("budget: must be >= 1")
        if self.review_mode not in ("interactive", "auto_accept"):
            raise ConfigError("review_mode: must be 'interactive' or 'auto_accept'")


def _build(settings: Mapping[str, Any]) -> AppConfig:
    try:
        weights_d = settings.get("weights", {})
        weights = Weights(
            w_sem=float(weights_d.get("semantic", 0.6)),
            w_lex=float(weights_d.get("lexical", 0.3)),
            w_rel=float(weights_d.get("relational", 0.1)),
        )
    except InvalidWeights as exc:
        raise ConfigError(f"weights: {exc}") from exc
    bm25_d = settings.get("bm25", {})
    try:
        bm25 = Bm25Params(k1=float(bm25_d.get("k1", 1.2)), b=float(bm25_d.get("b", 0.75)))
    except ValueError as exc:
        raise ConfigError(f"bm25: {exc}") from exc
    emb_d = settings.get("embedder", {})
    try:
        embedder = EmbedderSpec(
            kind=emb_d.get("kind", "hashing_default"),
            dim=int(emb_d.get("dim", DEFAULT_DIM)),
            endpoint=emb_d.get("endpoint"),
            api_key=emb_d.get("api_key"),
        )
    except ValueError as exc:
        raise ConfigError(f"embedder: {exc}") from exc
    gen_d = settings.get("generator", {})
    try:
        generator = GeneratorSpec(
            kind=gen_d.get("kind", "mock_echo"),
            endpoint=gen_d.get("endpoint"),
            model=gen_d.get("model", ""),
            api_key=gen_d.get("api_key"),
        )
    except ValueError as exc:
        raise ConfigError(f"generator: {exc}") from exc
    config = AppConfig(
        store_path=str(settings.get("store_path", "store")),
        weights=weights,
        bm25=bm25,
        embedder=embedder,
        generator=generator,
        pool_size=int(settings.get("pool_size", DEFAULT_POOL_SIZE)),
        cap=int(settings.get("cap", DEFAULT_CAP)),
        tau=float(settings.get("tau", DEFAULT_TAU)),
        budget=int(settings.get("budget", DEFAULT_BUDGET_TOKENS)),
        review_mode=str(settings.get("review_mode", "interactive")),
    )
    config.validate()
    return config


def _deep_merge(base: dict, extra: Mapping) -> dict:
    merged = dict(base)
    for key, value in extra.items():
        if value is None:
            continue
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
) -> AppConfig:
    """Load and validate configuration; the offending key is named in any
    :class:`ConfigError`."""
    env = os.environ if env is None else env
    settings: dict[str, Any] = {}
    config_path = path or env.get(ENV_CONFIG)
    if config_path:
        config_path = Path(config_path)
        if not config_path.exists():
            raise ConfigError(f"config file not found: {config_path}")
        try:
            settings = json.loads(config_path.read_text("utf-8"))
        except ValueError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(settings, dict):
            raise ConfigError("config file must hold a JSON object")
    env_over: dict[str, Any] = {}
    if env.get(ENV_ENDPOINT):
        env_over = {
            "embedder": {"endpoint": env[ENV_ENDPOINT]},
            "generator": {"endpoint": env[ENV_ENDPOINT]},
        }
    if env.get(ENV_API_KEY):
        env_over = _deep_merge(
            env_over,
            {"embedder": {"api_key": env[ENV_API_KEY]}, "generator": {"api_key": env[ENV_API_KEY]}},
        )
    settings = _deep_merge(settings, env_over)
    if overrides:
        settings = _deep_merge(settings, overrides)
    return _build(settings)
