"""
Configuration of the command-line toolkit.

Config files hold one "key = value" entry per line; '#' starts a comment.
Environment settings (RIDE_LOG_LEVEL, RIDE_THREADS) may come from a .env file.
"""

import io
import logging
import os
from pathlib import Path
from typing import Dict, List, Optional, Union

from dotenv.parser import parse_stream
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from misc.constants import (
    DEFAULT_COMPONENTS,
    DEFAULT_FEATURES,
    DEFAULT_HIDDEN_UNITS,
    DEFAULT_NEIGHBORHOOD_WIDTH,
    DEFAULT_ROWS_ABOVE,
    DEFAULT_SCALES,
)
from misc.exceptions import ConfigError
from schema.imaging import NeighborhoodSpec
from schema.sampling import InpaintConfig
from schema.training import TrainSchedule


# Section fields whose config key differs
_SECTION_KEYS = {"width": "neighborhood_width"}


class CliConfig(BaseModel):
    """Every key a config file may set, with its default."""
    # Neighborhood
    neighborhood_width: int = DEFAULT_NEIGHBORHOOD_WIDTH
    rows_above: int = DEFAULT_ROWS_ABOVE

    # Model sizes
    components: int = Field(default=DEFAULT_COMPONENTS, ge=1)
    scales: int = Field(default=DEFAULT_SCALES, ge=1)
    features: int = Field(default=DEFAULT_FEATURES, ge=1)
    hidden_units: List[int] = [DEFAULT_HIDDEN_UNITS]
    extended: bool = False

    # Standalone MCGSM training
    mcgsm_iterations: int = Field(default=3000, ge=1)
    mcgsm_pairs: Optional[int] = Field(default=None, ge=1)

    # RIDE training
    batch_size: int = 50
    momentum: float = 0.9
    lr_start: float = 1.0
    lr_end: float = 1e-4
    epochs: int = 8
    patch_sizes: List[int] = []
    finetune_iters: int = 500
    finetune_patches: int = 200
    early_stop_patience: int = 3
    batches_per_epoch: Optional[int] = None
    validation_patch: int = 64
    augment_flips: bool = True

    # Inpainting
    sweeps: int = 100
    block_size: int = 5
    block_overlap: int = 2
    local_window: int = 19
    init_candidates: int = 5
    flip_between_sweeps: bool = True

    model_config = ConfigDict(extra="forbid")

    @field_validator("hidden_units", "patch_sizes", mode="before")
    @classmethod
    def split_list(cls, value):
        if isinstance(value, str):
            return [int(part) for part in value.replace(",", " ").split()]
        return value

    @field_validator("mcgsm_pairs", "batches_per_epoch", mode="before")
    @classmethod
    def empty_is_none(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "none"):
            return None
        return value

    def neighborhood(self) -> NeighborhoodSpec:
        return NeighborhoodSpec(width=self.neighborhood_width, rows_above=self.rows_above)

    def schedule(self) -> TrainSchedule:
        return TrainSchedule(**self.model_dump(include=set(TrainSchedule.model_fields)))

    def inpaint(self) -> InpaintConfig:
        return InpaintConfig(**self.model_dump(include=set(InpaintConfig.model_fields)))


def _entry_line(binding) -> int:
    # Bindings start at the blank lines preceding them
    text = binding.original.string
    return binding.original.line + text[:len(text) - len(text.lstrip())].count("\n")


def parse_config(text: str) -> CliConfig:
    """
    Parse config file contents.

    Raises:
        ConfigError: For malformed lines, unknown or repeated keys, and values
            rejected by validation; the message names the line
    """
    values: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    for binding in parse_stream(io.StringIO(text)):
        line = _entry_line(binding)
        if binding.error:
            raise ConfigError(f"cannot parse {binding.original.string.strip()!r}", line)
        if binding.key is None:
            continue
        if binding.key not in CliConfig.model_fields:
            raise ConfigError(f"unknown key {binding.key!r}", line)
        if binding.key in values:
            raise ConfigError(f"key {binding.key!r} repeats line {lines[binding.key]}", line)
        if binding.value is None:
            raise ConfigError(f"key {binding.key!r} has no value", line)
        values[binding.key] = binding.value
        lines[binding.key] = line

    try:
        config = CliConfig(**values)
        # Cross-field checks live on the section models
        config.neighborhood(), config.schedule(), config.inpaint()
    except ValidationError as e:
        error = e.errors()[0]
        key = error["loc"][0] if error["loc"] else None
        key = _SECTION_KEYS.get(key, key)
        message = f"{key}: {error['msg']}" if key else error["msg"]
        raise ConfigError(message, lines.get(key))
    return config


def parse_config_file(path: Union[str, Path]) -> CliConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


class Settings(BaseModel):
    """Process-wide settings read from the environment."""
    log_level: str = "INFO"

    @field_validator("log_level")
    @classmethod
    def known_level(cls, value: str) -> str:
        if not isinstance(logging.getLevelName(value), int):
            raise ValueError(f"unknown log level {value!r}")
        return value


def load_settings() -> Settings:
    """
    Read RIDE_LOG_LEVEL (call load_dotenv first to honor a .env file).

    RIDE_THREADS is read by the --threads option of the parallel commands.
    """
    try:
        return Settings(log_level=os.getenv("RIDE_LOG_LEVEL", "INFO").upper())
    except ValidationError as e:
        raise ConfigError(f"invalid environment setting: {e.errors()[0]['msg']}")
