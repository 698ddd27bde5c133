"""
Settings and resource caps.

Values come from the environment (optionally a `.env` file) and can be
overridden per call by passing an explicit `ResourceCaps`.
"""
import logging
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

# Load environment variables from .env
load_dotenv()


class ResourceCaps(BaseModel):
    """Limits that keep every kernel bounded."""
    degree_cap: int = Field(64, ge=1)
    pair_cap: int = Field(1_000_000, ge=1)
    digit_cap: int = Field(1_000_000, ge=1)
    coefficient_bound: int = Field(101, ge=1)
    trials: int = Field(3, ge=1)
    max_retries: int = Field(12, ge=1)

    model_config = {"frozen": True}


class Settings(BaseModel):
    seed: int = 0
    log_level: str = "WARNING"
    caps: ResourceCaps = ResourceCaps()


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.error(f"Ignoring non-integer {name}={raw!r}")
        return default


def env_seed() -> Optional[int]:
    """Seed forced by KOHN_SEED, or None when unset."""
    raw = os.getenv("KOHN_SEED")
    if raw is None or raw == "":
        return None
    return _int_env("KOHN_SEED", 0)


def load_settings() -> Settings:
    caps = ResourceCaps(
        degree_cap=_int_env("KOHN_DEGREE_CAP", 64),
        pair_cap=_int_env("KOHN_PAIR_CAP", 1_000_000),
        digit_cap=_int_env("KOHN_DIGIT_CAP", 1_000_000),
        coefficient_bound=_int_env("KOHN_COEFF_BOUND", 101),
        trials=_int_env("KOHN_TRIALS", 3),
        max_retries=_int_env("KOHN_MAX_RETRIES", 12),
    )
    return Settings(
        seed=_int_env("KOHN_SEED", 0),
        log_level=os.getenv("KOHN_LOG_LEVEL", "WARNING"),
        caps=caps,
    )


def default_caps() -> ResourceCaps:
    return load_settings().caps


def resolve_caps(caps: Optional[ResourceCaps]) -> ResourceCaps:
    return caps if caps is not None else default_caps()
