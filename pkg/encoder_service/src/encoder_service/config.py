"""Service configuration from ENCODER_* environment variables."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping


@dataclass(frozen=True)
class EncoderConfig:
    model: str = "hash://64"
    port: int = 8100
    max_batch: int = 256
    normalize: bool = False  # off by default; callers expect raw vectors

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model must be non-empty")
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")
        if not 0 < self.port < 65536:
            raise ValueError(f"port must be in [1, 65535], got {self.port}")


def from_env(env: Mapping[str, str] | None = None) -> EncoderConfig:
    env = os.environ if env is None else env
    return EncoderConfig(
        model=env.get("ENCODER_MODEL", "hash://64"),
        port=int(env.get("ENCODER_PORT", "8100")),
        max_batch=int(env.get("ENCODER_MAX_BATCH", "256")),
    )
