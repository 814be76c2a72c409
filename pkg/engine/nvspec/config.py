"""Process-level settings for nvspec runs."""

from __future__ import annotations

from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Settings loaded from ``NVSPEC_*`` environment variables or a ``.env`` file."""

    model_config = SettingsConfigDict(
        env_prefix="NVSPEC_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Seeding (NVSPEC_SEED is the fallback when --seed is not given)
    seed: int = 0

    # Parallelism; None means one worker per available CPU
    threads: int | None = None

    # Output
    output_dir: Path = Path("results")
    log_level: str = "INFO"


settings = Settings()
