"""
Run configuration.

Values are resolved with the precedence: explicit overrides (CLI flags) >
JSON config file > environment (``SOBONET_THREADS``, ``SOBONET_OUTPUT_DIR``,
read after loading the nearest ``.env`` above the working directory) >
field defaults.
"""
from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Union

from dotenv import find_dotenv, load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from .errors import InvalidInputError

logger = logging.getLogger(__name__)

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR"]


class GridSizes(BaseModel):
    """Default points per axis for validation grids."""

    d1: int = 2 ** 14
    d2: int = 512
    d3: int = 64
    jitter: float = 0.4871

    @field_validator("jitter")
    @classmethod
    def _jitter_inside_cell(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("jitter must lie strictly inside (0, 1)")
        return v

    def for_dim(self, d: int) -> int:
        return {1: self.d1, 2: self.d2}.get(d, self.d3)


class RunConfig(BaseModel):
    seed: int = 0
    threads: int = 1
    output_dir: Path = Path("outputs")
    log_level: LogLevel = "INFO"
    grid: GridSizes = Field(default_factory=GridSizes)
    # natural log in the Dudley/covering chain unless set to 2
    log_base: float = Field(default=0.0, description="0 means natural log")

    @field_validator("seed")
    @classmethod
    def _seed_nonneg(cls, v: int) -> int:
        if v < 0:
            raise ValueError("seed must be >= 0")
        return v

    @field_validator("threads")
    @classmethod
    def _threads_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("threads must be >= 1")
        return v


def _from_env() -> Dict[str, Any]:
    load_dotenv(find_dotenv(usecwd=True))
    env: Dict[str, Any] = {}
    if os.getenv("SOBONET_THREADS"):
        env["threads"] = os.environ["SOBONET_THREADS"]
    if os.getenv("SOBONET_OUTPUT_DIR"):
        env["output_dir"] = os.environ["SOBONET_OUTPUT_DIR"]
    return env


def load_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> RunConfig:
    """Build a RunConfig from env, an optional JSON file and explicit overrides."""
    merged: Dict[str, Any] = _from_env()
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidInputError(f"cannot read config file {path}: {e}") from e
        if not isinstance(doc, dict):
            raise InvalidInputError(f"config file {path} must hold a JSON object")
        merged.update(doc)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = RunConfig(**merged)
    except ValidationError as e:
        raise InvalidInputError(f"invalid configuration: {e}") from e
    logger.debug("resolved config: %s", cfg.model_dump(mode="json"))
    return cfg
