"""
Runtime settings read from the environment.
"""
from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Service-wide settings (environment variables or a local .env file)
    """

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")

    log_dir: Path = Field(Path("./logs"), description="Directory for log files")
    output_dir: Path = Field(Path("results"), description="Default output directory")
    max_workers: int = Field(4, ge=1, description="Thread pool size for sweeps")
    bootstrap_resamples: int = Field(200, ge=1, description="Default bootstrap resamples")


@lru_cache
def get_settings() -> Settings:
    """
    Get the cached settings instance
    """
    return Settings()
