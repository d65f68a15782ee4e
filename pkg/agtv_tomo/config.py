"""Configuration management for agtv-tomo"""

import os
from pathlib import Path
from typing import Dict, Optional

from dotenv import dotenv_values, load_dotenv


def get_env(key: str, default: Optional[str] = None) -> str:
    """Get environment variable with optional default."""
    # .env in the working directory never overrides the real environment
    load_dotenv(Path.cwd() / ".env", override=False)

    value = os.getenv(key, default)
    if value is None:
        raise ValueError(f"Environment variable {key} is required but not set")
    return value


def get_env_int(key: str, default: int = 0) -> int:
    """Get environment variable as integer."""
    value = get_env(key, str(default))
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"Environment variable {key} must be an integer, got: {value}")


def read_flat_config(path: Path) -> Dict[str, str]:
    """
    Read a flat key=value configuration file.

    Manifests written by the CLI use the same format, so a manifest can be
    passed back through ``--config`` to reproduce a run.

    Args:
        path: Path to the configuration file

    Returns:
        Mapping of keys to raw string values (empty values dropped)
    """
    path = Path(path)
    if not path.exists():
        raise ValueError(f"Config file not found: {path}")
    values = dotenv_values(path)
    return {key: value for key, value in values.items() if value not in (None, "")}


class Config:
    """Application configuration from environment variables."""

    OUTPUT_DIR: str = "runs"
    LOG_FILE: str = "agtv_tomo.log"
    LOG_LEVEL: str = "INFO"
    SWEEP_CAP: int = 5000
    WORKERS: int = 1
    COMPARE_SEEDS: int = 5

    @classmethod
    def load(cls) -> "Config":
        """Load configuration from environment variables."""
        config = cls()

        config.OUTPUT_DIR = get_env("AGTV_OUTPUT_DIR", "runs")
        config.LOG_FILE = get_env("AGTV_LOG_FILE", "agtv_tomo.log")
        config.LOG_LEVEL = get_env("AGTV_LOG_LEVEL", "INFO").upper()
        config.SWEEP_CAP = get_env_int("AGTV_SWEEP_CAP", 5000)
        config.WORKERS = get_env_int("AGTV_WORKERS", 1)
        config.COMPARE_SEEDS = get_env_int("AGTV_COMPARE_SEEDS", 5)

        return config

    @property
    def output_dir(self) -> Path:
        """Get root directory for run outputs."""
        return Path(self.OUTPUT_DIR)

    def validate(self) -> None:
        """Validate configuration."""
        if self.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ValueError("AGTV_LOG_LEVEL must be DEBUG, INFO, WARNING or ERROR")

        if self.SWEEP_CAP < 1:
            raise ValueError("AGTV_SWEEP_CAP must be at least 1")

        if self.WORKERS < 1:
            raise ValueError("AGTV_WORKERS must be at least 1")

        if self.COMPARE_SEEDS < 1:
            raise ValueError("AGTV_COMPARE_SEEDS must be at least 1")
