"""Process settings from the environment and experiment configuration files."""

import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import BaseModel, Field, ValidationError

from .errors import ConfigError
from .schemas.experiment import ExperimentConfig

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _int_env(name: str, default: Optional[int]) -> Optional[int]:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


class Settings(BaseModel):
    """Process-wide knobs that do not change results."""

    output_dir: str = Field(default="./runs", description="Default directory for emitted files")
    log_level: str = Field(default="INFO", description="Root log level")
    chunk_size: int = Field(default=4096, ge=1, description="Pairs per Gram-assembly chunk")
    fine_ratio: Optional[int] = Field(
        default=None, ge=1, description="Override of the reference-solver substep factor"
    )

    @classmethod
    def from_env(
        cls,
        output_dir: Optional[str] = None,
        log_level: Optional[str] = None,
    ) -> "Settings":
        """Read HAMLEARN_* variables; explicit arguments take precedence.

        Raises:
            ConfigError: For a non-integer size or an unknown log level
        """
        level = (log_level or os.getenv("HAMLEARN_LOG_LEVEL") or "INFO").upper()
        if level not in LOG_LEVELS:
            raise ConfigError(f"HAMLEARN_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}")
        return cls(
            output_dir=output_dir or os.getenv("HAMLEARN_OUTPUT_DIR") or "./runs",
            log_level=level,
            chunk_size=_int_env("HAMLEARN_CHUNK_SIZE", 4096),
            fine_ratio=_int_env("HAMLEARN_FINE_RATIO", None),
        )


def configure_logging(settings: Settings, verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def read_config_file(path: Union[str, Path]) -> dict[str, Any]:
    """Parse a flat TOML experiment file into a dict of ExperimentConfig keys."""
    path = Path(path)
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    nested = [key for key, value in data.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f"{path}: config is flat, found tables {', '.join(nested)}")
    return data


def load_experiment_config(
    path: Optional[Union[str, Path]] = None,
    preset: Optional[str] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> ExperimentConfig:
    """Merge preset, file and explicit overrides, in that order, into one config.

    Raises:
        UnknownSystemError: If the preset does not exist
        ConfigError: If the merged values do not validate
    """
    from .presets import preset_values

    values: dict[str, Any] = {}
    if preset is not None:
        values.update(preset_values(preset))
    if path is not None:
        values.update(read_config_file(path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig.model_validate(values)
    except ValidationError as exc:
        raise ConfigError(f"invalid experiment configuration: {exc}") from exc
