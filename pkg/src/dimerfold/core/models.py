"""
Run configuration and shared enums.

A RunConfig is read from a flat YAML key-value file passed with ``--config``;
unknown keys are rejected so that the manifest digest always describes the
full run.

Version: 0.1.0
"""

from __future__ import annotations

import hashlib
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from dimerfold.core.exceptions import (
    ConfigNotFoundError,
    ConfigParseError,
    ConfigValidationError,
)


class Model(str, Enum):
    """The two double-dimer models with arcs."""

    FOLDED = "folded"
    SHIFTED = "shifted"

    @property
    def series_constant(self) -> float:
        """c in det(I + c alpha S K^-1): 2 for folded, 1 for shifted."""
        return 2.0 if self is Model.FOLDED else 1.0


class Provenance(str, Enum):
    """Where a moment estimate came from."""

    MONTE_CARLO = "monte-carlo"
    EXACT = "exact-enumeration"
    TRACE_SERIES = "trace-series"
    CONTINUUM = "continuum"


class RunConfig(BaseModel):
    """Parameters of one CLI run.

    Strip runs need no descriptor file: ``height`` rows of cells with mesh
    pi/height and half width ``half_width`` (default 2 pi).
    ``tolerance_o`` and ``tolerance_n`` bound the strip-check gaps; ``confirm``
    adds the rerun at twice the height.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    domain: Path | None = None
    height: int = Field(default=40, ge=2)
    half_width: float = Field(default=2 * math.pi, gt=0)
    model: Model = Model.FOLDED
    z: tuple[float, float] = (0.0, math.pi / 4)
    waypoints: list[tuple[float, float]] = Field(default_factory=list)
    direction: Literal["NE", "NW"] = "NE"
    alphas: list[float] = Field(default_factory=lambda: [0.1, 0.25, 0.5])
    samples: int = Field(default=10_000, ge=1)
    sampler: Literal["auto", "wilson", "determinantal"] = "auto"
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    n_max: int = Field(default=6, ge=1)
    y_values: list[float] = Field(
        default_factory=lambda: [math.pi / 6, math.pi / 4, math.pi / 3]
    )
    cylinder_sizes: list[tuple[int, int]] = Field(
        default_factory=lambda: [(3, 2), (3, 4)]
    )
    y_grid: list[float] = Field(default_factory=lambda: [1.0, 1.25, 1.5, 2.0, 3.0])
    limit_sizes: list[tuple[int, int]] = Field(default_factory=list)
    corpus: Path | None = None
    connections: int = Field(default=20, ge=1)
    inject_fault: bool = False
    tolerance: float = Field(default=1e-8, gt=0)
    tolerance_o: float = Field(default=0.03, gt=0)
    tolerance_n: float = Field(default=0.05, gt=0)
    confirm: bool = True
    output_dir: Path = Path("runs")
    timestamp: bool = True

    @field_validator("alphas")
    @classmethod
    def _alpha_range(cls, values: list[float]) -> list[float]:
        for a in values:
            if not 0 <= a < 1:
                raise ValueError(f"alpha must lie in [0, 1), got {a}")
        return values

    @field_validator("y_values")
    @classmethod
    def _y_range(cls, values: list[float]) -> list[float]:
        for y in values:
            if not 0 < y <= math.pi / 2:
                raise ValueError(f"y must lie in (0, pi/2], got {y}")
        return values

    @field_validator("cylinder_sizes", "limit_sizes")
    @classmethod
    def _cylinder_size(cls, values: list[tuple[int, int]]) -> list[tuple[int, int]]:
        for n, m in values:
            if n < 2 or m < 1 or (n % 2 == 0 and m % 2 == 1):
                raise ValueError(f"cylinder needs n >= 2, m >= 1 and even m for even n, got {n}x{m}")
        return values

    @field_validator("domain", "corpus")
    @classmethod
    def _file_exists(cls, value: Path | None) -> Path | None:
        if value is not None and not Path(value).is_file():
            raise ValueError(f"file does not exist: {value}")
        return value

    def with_overrides(self, **overrides: Any) -> RunConfig:
        """Copy with CLI flag values applied; ``None`` means "not given"."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return RunConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigValidationError(
                "Invalid run configuration", errors=_format_errors(e)
            ) from e

    def digest(self) -> str:
        """sha256 of the canonical JSON form.

        The timestamp flag and the output directory do not change results and
        are excluded, so reruns elsewhere share a digest.
        """
        payload = self.model_dump(mode="json", exclude={"timestamp", "output_dir"})
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _format_errors(error: ValidationError) -> list[str]:
    return [
        f"{'.'.join(str(p) for p in item['loc'])}: {item['msg']}"
        for item in error.errors()
    ]


def load_run_config(path: Path | None) -> RunConfig:
    """Read a RunConfig from YAML; ``None`` gives the defaults.

    Raises:
        ConfigNotFoundError: path does not exist.
        ConfigParseError: not YAML, or not a flat mapping.
        ConfigValidationError: unknown key or out-of-range value.
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigNotFoundError(str(path))
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigParseError(str(path), parse_error=str(e)) from e
    if not isinstance(data, dict):
        raise ConfigParseError(str(path), parse_error="top level must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigValidationError(
            f"Invalid run configuration: {path}", errors=_format_errors(e)
        ) from e
