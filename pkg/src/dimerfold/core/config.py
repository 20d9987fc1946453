"""
dimerfold Configuration Management.

Application-wide settings supporting:
- YAML configuration files (dimerfold.yaml)
- A config/ directory of YAML fragments
- Environment variable overrides
- Default values

Version: 0.1.0

Configuration Priority (highest to lowest):
1. Environment variables (DIMERFOLD_*)
2. YAML configuration file
3. config/*.yaml files next to it
4. Default values

Per-run experiment parameters live in RunConfig (dimerfold.core.models).
"""

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from dimerfold.core.exceptions import (
    ConfigNotFoundError,
    ConfigParseError,
    ConfigValidationError,
)
from dimerfold.core.logging import get_logger

logger = get_logger(__name__)

CONFIG_FILENAME = "dimerfold.yaml"
ENV_PREFIX = "DIMERFOLD_"

# =============================================================================
# Default Configuration Values
# =============================================================================

DEFAULT_CONFIG: dict[str, Any] = {
    "version": "0.1.0",
    "logging": {
        "level": "WARNING",
        "format": "console",
    },
    "enumeration": {
        "max_vertices": 36,
        "max_matchings": 1_000_000,
    },
    "linalg": {
        "pfaffian_method": "householder",
        "condition_limit": 1e12,
    },
    "sampler": {
        "drift_tolerance": 1e-6,
        "batch_size": 4096,
    },
    "quadrature": {
        "nodes": 24,
        "tolerance": 1e-8,
    },
    "series": {
        "n_max": 6,
    },
    "run": {
        "seed": 0,
        "threads": 1,
        "output_dir": "runs",
    },
}


# =============================================================================
# Configuration Data Classes
# =============================================================================


@dataclass(frozen=True)
class LoggingConfig:
    """Logging configuration."""

    level: str = "WARNING"
    format: str = "console"


@dataclass(frozen=True)
class EnumerationConfig:
    """Caps for brute-force oracles."""

    max_vertices: int = 36
    max_matchings: int = 1_000_000


@dataclass(frozen=True)
class LinalgConfig:
    """Numerical kernel configuration."""

    pfaffian_method: str = "householder"
    condition_limit: float = 1e12


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler configuration."""

    drift_tolerance: float = 1e-6
    batch_size: int = 4096


@dataclass(frozen=True)
class QuadratureConfig:
    """Gauss-Legendre quadrature for the continuum path integrals."""

    nodes: int = 24
    tolerance: float = 1e-8


@dataclass(frozen=True)
class SeriesConfig:
    """Trace series depth."""

    n_max: int = 6


@dataclass(frozen=True)
class RunDefaults:
    """Defaults for CLI runs."""

    seed: int = 0
    threads: int = 1
    output_dir: str = "runs"


@dataclass(frozen=True)
class DimerFoldConfig:
    """
    Complete dimerfold configuration.

    Combines all configuration sections into a single object.
    """

    version: str = "0.1.0"
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    enumeration: EnumerationConfig = field(default_factory=EnumerationConfig)
    linalg: LinalgConfig = field(default_factory=LinalgConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    series: SeriesConfig = field(default_factory=SeriesConfig)
    run: RunDefaults = field(default_factory=RunDefaults)


# =============================================================================
# Configuration Loading
# =============================================================================


def find_config_file(start_path: Path | None = None) -> Path | None:
    """
    Find dimerfold.yaml by walking up from start_path (default: cwd).

    Returns:
        Path to config file if found, None otherwise
    """
    current = Path(start_path) if start_path else Path.cwd()

    while True:
        candidate = current / CONFIG_FILENAME
        if candidate.exists():
            return candidate
        if current == current.parent:
            return None
        current = current.parent


def load_yaml_config(path: Path) -> dict[str, Any]:
    """
    Load configuration from YAML file.

    Raises:
        ConfigNotFoundError: If file doesn't exist
        ConfigParseError: If YAML parsing fails or the top level is not a mapping
    """
    if not path.exists():
        raise ConfigNotFoundError(str(path))

    try:
        with open(path, encoding="utf-8") as f:
            config = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigParseError(str(path), parse_error=str(e)) from e

    if not isinstance(config, dict):
        raise ConfigParseError(str(path), parse_error="top level must be a mapping")
    return config


def load_config_directory(config_dir: Path) -> dict[str, Any]:
    """Load and merge all YAML files of a directory, in sorted order."""
    merged_config: dict[str, Any] = {}

    if not config_dir.is_dir():
        return merged_config

    for yaml_file in sorted(config_dir.glob("*.yaml")):
        try:
            merged_config = merge_configs(merged_config, load_yaml_config(yaml_file))
        except (ConfigNotFoundError, ConfigParseError) as e:
            logger.warning("config_file_skipped", path=str(yaml_file), error=str(e))

    return merged_config


def get_env_overrides() -> dict[str, Any]:
    """
    Get configuration overrides from environment variables.

    Variables are prefixed with DIMERFOLD_ and use a double underscore for
    nested keys, e.g. DIMERFOLD_ENUMERATION__MAX_VERTICES=40.
    """
    overrides: dict[str, Any] = {}

    for key, value in os.environ.items():
        if not key.startswith(ENV_PREFIX):
            continue

        parts = key[len(ENV_PREFIX) :].lower().split("__")
        current = overrides
        for part in parts[:-1]:
            current = current.setdefault(part, {})
        current[parts[-1]] = _convert_env_value(value)

    return overrides


def _convert_env_value(value: str) -> Any:
    """Convert environment variable string to appropriate type."""
    if value.lower() in ("true", "yes"):
        return True
    if value.lower() in ("false", "no"):
        return False

    try:
        return int(value)
    except ValueError:
        pass

    try:
        return float(value)
    except ValueError:
        pass

    return value


def merge_configs(*configs: dict[str, Any]) -> dict[str, Any]:
    """Deep merge configuration dictionaries; later ones win."""
    result: dict[str, Any] = {}

    for config in configs:
        for key, value in config.items():
            if (
                key in result
                and isinstance(result[key], dict)
                and isinstance(value, dict)
            ):
                result[key] = merge_configs(result[key], value)
            else:
                result[key] = value

    return result


def load_config(config_path: Path | None = None) -> dict[str, Any]:
    """
    Load complete configuration with all sources merged.

    Args:
        config_path: Optional explicit path to dimerfold.yaml

    Returns:
        Complete merged configuration dictionary
    """
    configs = [DEFAULT_CONFIG]

    yaml_path = config_path or find_config_file()
    base_path = yaml_path.parent if yaml_path else Path.cwd()

    dir_config = load_config_directory(base_path / "config")
    if dir_config:
        configs.append(dir_config)

    if yaml_path:
        configs.append(load_yaml_config(yaml_path))

    env_overrides = get_env_overrides()
    if env_overrides:
        configs.append(env_overrides)

    return merge_configs(*configs)


def _section(cls: type, values: dict[str, Any], name: str) -> Any:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigValidationError(
            f"Unknown keys in section '{name}'",
            errors=[f"{name}.{key}" for key in unknown],
        )
    return cls(**values)


def config_to_dataclass(config: dict[str, Any]) -> DimerFoldConfig:
    """Convert a configuration dictionary to a DimerFoldConfig."""
    return DimerFoldConfig(
        version=str(config.get("version", "0.1.0")),
        logging=_section(LoggingConfig, config.get("logging", {}), "logging"),
        enumeration=_section(
            EnumerationConfig, config.get("enumeration", {}), "enumeration"
        ),
        linalg=_section(LinalgConfig, config.get("linalg", {}), "linalg"),
        sampler=_section(SamplerConfig, config.get("sampler", {}), "sampler"),
        quadrature=_section(
            QuadratureConfig, config.get("quadrature", {}), "quadrature"
        ),
        series=_section(SeriesConfig, config.get("series", {}), "series"),
        run=_section(RunDefaults, config.get("run", {}), "run"),
    )


# =============================================================================
# Global Configuration Instance
# =============================================================================

_config: DimerFoldConfig | None = None


def get_config(reload: bool = False) -> DimerFoldConfig:
    """Get the global configuration instance, loading it on first use."""
    global _config

    if _config is None or reload:
        _config = config_to_dataclass(load_config())

    return _config


def reset_config() -> None:
    """Reset the global configuration (mainly for testing)."""
    global _config
    _config = None
