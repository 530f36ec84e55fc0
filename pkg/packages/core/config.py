"""Process-level settings."""

from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Settings loaded from environment variables (and an optional .env)."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # App
    app_env: str = Field(default="development")
    log_level: str = Field(default="INFO")

    # Numerics
    dense_cutoff: int = Field(default=256, ge=1)
    solver_rtol: float = Field(default=1e-10, gt=0)
    solver_maxiter_factor: int = Field(default=10, ge=1)
    eig_rtol: float = Field(default=1e-8, gt=0)

    # Output
    output_dir: Path = Field(default=Path("reports"))

    @property
    def is_production(self) -> bool:
        return self.app_env == "production"


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
