"""YAML application configuration mirroring the train/encoder/gateway settings."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .corpus import DEFAULT_VENUES
from .encoder import EncoderConfig
from .llm_gateway import GatewayConfig
from .training import TrainConfig


@dataclass
class ServiceConfig:
    artifacts_dir: str = "artifacts"
    host: str = "127.0.0.1"
    port: int = 8000
    workers: int = 4
    static_dir: str | None = None


@dataclass
class AppConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig.from_env)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    venues: frozenset[str] = DEFAULT_VENUES


def load_config(path: str | Path | None = None) -> AppConfig:
    """Config file sections: encoder, train, gateway, service, corpus.venues."""
    if path is None:
        return AppConfig()
    payload = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    encoder = EncoderConfig(**payload.get("encoder", {}))
    train = TrainConfig(**payload.get("train", {}))
    gateway = GatewayConfig.from_env(**payload.get("gateway", {}))
    service = ServiceConfig(**payload.get("service", {}))
    venues = frozenset(payload.get("corpus", {}).get("venues", DEFAULT_VENUES))
    if "seeds" in payload.get("train", {}):
        train.seeds = tuple(payload["train"]["seeds"])
    return AppConfig(encoder=encoder, train=train, gateway=gateway, service=service, venues=venues)
