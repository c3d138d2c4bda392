"""Process-level settings from the environment (prefix ISK_) or a .env file."""
from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="ISK_", env_file=".env", extra="ignore")

    data_dir: Path = Path("./data")
    ledger_url: str = "sqlite:///./isk_runs.db"
    ledger_echo: bool = False
    threads: int = Field(default=1, ge=1)
    log_level: str = "INFO"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
