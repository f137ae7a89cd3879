"""
Runtime Settings
Environment-driven configuration for the bangtensor tools
"""
from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class BangTensorSettings(BaseSettings):
    """Settings read from BT_* environment variables or a local .env file"""

    model_config = SettingsConfigDict(env_prefix="BT_", env_file=".env", extra="ignore")

    default_bound: int = Field(default=2, ge=0)
    float_tolerance: float = Field(default=1e-9, gt=0)
    canonical_search_budget: int = Field(default=5000, ge=1)
    log_level: str = "WARNING"
    log_json: bool = False
    # seeds the randomized model tests; the CLI never reads it
    seed: Optional[int] = None
    audit_log_path: Optional[Path] = None


@lru_cache
def get_settings() -> BangTensorSettings:
    """Return the process-wide settings instance"""
    return BangTensorSettings()
