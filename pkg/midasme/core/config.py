"""
Application configuration
"""
import os
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings"""
    ENVIRONMENT: str = "production"
    LOG_LEVEL: Optional[str] = None
    # None means one worker per available core
    DEFAULT_THREADS: Optional[int] = None
    OUTPUT_DIR: str = "./results"
    BOOTSTRAP_RESAMPLES: int = 200

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="MIDASME_",
        case_sensitive=True,
        extra="ignore",
    )

    @property
    def threads(self) -> int:
        """Worker count used when a run does not set one"""
        if self.DEFAULT_THREADS and self.DEFAULT_THREADS > 0:
            return self.DEFAULT_THREADS
        return os.cpu_count() or 1


settings = Settings()
