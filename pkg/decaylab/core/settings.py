from functools import lru_cache

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    """Process-level defaults. Run-config files override these per run."""

    model_config = SettingsConfigDict(env_prefix="DECAYLAB_", extra="ignore")

    log_level: str = "INFO"
    output_dir: str = "out"
    jobs: int = 1
    seed: int = 20240607

    # Dense eigensolves (structure checks, sqrtAA, Gramian) stop here
    dense_limit: int = 512
    # Post-step solves switch from sparse LU to CG above this dimension
    cg_threshold: int = 20000


@lru_cache()
def get_settings() -> Settings:
    return Settings()


def reset_settings_cache() -> None:
    get_settings.cache_clear()
