"""
Toolkit configuration using Pydantic Settings.
"""
from functools import lru_cache
from typing import Union

from pydantic import field_validator
from pydantic_settings import BaseSettings

from qmask import __version__


class Settings(BaseSettings):
    """Toolkit settings, overridable through ``QMASK_*`` environment variables."""

    # Application
    APP_NAME: str = "qmask"
    APP_VERSION: str = __version__

    # Dimension caps
    DIM_CAP: int = 2**14
    DECOUPLING_DIM_CAP: int = 2**12
    CODE_DIM_CAP: int = 2**12

    # Numerical tolerances
    HERMITIAN_TOL: float = 1e-10
    POSITIVITY_TOL: float = 1e-9
    TRACE_TOL: float = 1e-9
    ENTROPY_CLIP: float = 1e-12

    # Parallelism (1 = serial)
    MAX_WORKERS: int = 1

    # Output
    CSV_PRECISION: int = 12

    # Logging
    LOG_LEVEL: str = "WARNING"
    LOG_JSON: bool = False

    @field_validator("DIM_CAP", "DECOUPLING_DIM_CAP", "CODE_DIM_CAP", mode="before")
    @classmethod
    def parse_dimension(cls, v: Union[str, int]) -> int:
        """Accept plain integers or powers written as ``2**k`` / ``2^k``."""
        if isinstance(v, str):
            text = v.strip().replace("^", "**")
            if "**" in text:
                base, exponent = text.split("**", 1)
                return int(base) ** int(exponent)
            return int(text)
        return v

    @field_validator("MAX_WORKERS")
    @classmethod
    def check_workers(cls, v: int) -> int:
        """At least one worker."""
        return max(1, v)

    class Config:
        env_file = ".env"
        env_prefix = "QMASK_"
        case_sensitive = True


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# Create settings instance
settings = get_settings()
