"""
Core configuration service for the dynamics learner.

This module provides a centralised way to access process-level settings
(logging, worker pool size, debug dumps) from environment variables and
.env files. Experiment parameters live in run configuration files, see
app.core.configuration.run_config.
"""

import os
import sys
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from dotenv import load_dotenv
from pydantic import Field, ValidationError, ValidationInfo, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
LOG_FORMATS = ["standard", "json"]
ENVIRONMENTS = ["development", "testing", "staging", "production"]

# field -> (allowed values, label used in messages, normalisation)
ENUMERATED_FIELDS: Dict[str, Tuple[List[str], str, Callable[[str], str]]] = {
    "log_level": (LOG_LEVELS, "Log level", str.upper),
    "log_format": (LOG_FORMATS, "Log format", str.lower),
    "environment": (ENVIRONMENTS, "Environment", str.lower),
}

ENV_PREFIX = "DYNLEARN_"
PROJECT_ROOT = Path(__file__).parents[3]


def _validate_field_value(
    value: str,
    allowed_values: List[str],
    field_name: str,
    transform: Callable = lambda x: x,
) -> str:
    """
    Normalise a value and check it against its allowed set.

    Args:
        value: Raw value from the environment
        allowed_values: Accepted values after normalisation
        field_name: Label used in the error message
        transform: Normalisation applied before the check

    Returns:
        The normalised value

    Raises:
        ValueError: If the normalised value is not allowed
    """
    normalised = transform(value)
    if normalised not in allowed_values:
        raise ValueError(f"{field_name} must be one of {allowed_values}")
    return normalised


class Settings(BaseSettings):
    """Process settings loaded from environment variables."""

    app_name: str = Field(default="Dynamics Learner")
    version: str = Field(default="0.1.0")
    environment: str = Field(default="development")
    log_level: str = Field(default="INFO")
    log_format: str = Field(default="standard")
    log_to_file: bool = Field(default=False)
    log_dir: str = Field(default="logs")
    workers: int = Field(default=4, ge=1)
    adjoint_dump_dir: Optional[str] = Field(default=None)

    @field_validator(*ENUMERATED_FIELDS)
    @classmethod
    def validate_enumerated(cls, v: str, info: ValidationInfo) -> str:
        """Validate log level, log format and environment."""
        allowed, label, transform = ENUMERATED_FIELDS[info.field_name]
        return _validate_field_value(v, allowed, label, transform)

    @field_validator("log_dir", "adjoint_dump_dir")
    @classmethod
    def expand_directory(cls, v: Optional[str], info: ValidationInfo) -> Optional[str]:
        """Expand ``~`` in directory settings; an empty dump dir disables dumps."""
        if v is None:
            return v
        v = v.strip()
        if not v and info.field_name == "adjoint_dump_dir":
            return None
        return os.path.expanduser(v)

    model_config = SettingsConfigDict(
        env_prefix=ENV_PREFIX,
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


def _load_env_files() -> None:
    """
    Load ``.env.<environment>`` and then ``.env`` from the project root.

    Values from the environment-specific file override the process
    environment; the default file only fills gaps.
    """
    env = os.getenv(f"{ENV_PREFIX}ENVIRONMENT", "development")
    specific = PROJECT_ROOT / f".env.{env}"
    default = PROJECT_ROOT / ".env"

    if specific.exists():
        load_dotenv(str(specific), override=True)

    if default.exists():
        load_dotenv(str(default))


def _create_settings() -> Settings:
    """Build Settings, reporting every failure as ValueError."""
    try:
        return Settings()
    except ValidationError as e:
        raise ValueError(str(e)) from e
    except Exception as e:
        raise ValueError(f"Configuration error: {str(e)}") from e


@lru_cache()
def get_settings() -> Settings:
    """
    Load and return process settings with caching.

    Returns:
        Settings: Process configuration settings

    Raises:
        ValueError: If environment variables are invalid
    """
    _load_env_files()
    return _create_settings()


def _create_global_settings() -> Optional[Settings]:
    """
    Settings for module-level import, or None when they cannot be loaded.

    Consumers treat None as "use built-in defaults".
    """
    try:
        return get_settings()
    except ValueError as e:
        print(f"ERROR: Failed to load configuration: {str(e)}", file=sys.stderr)
        return None


settings = _create_global_settings()
