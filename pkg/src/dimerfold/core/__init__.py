"""
dimerfold Core Layer.

Core infrastructure components:
- Exceptions: structured exception hierarchy rooted at DimerFoldError
- Config: layered application settings (defaults, YAML, environment)
- Models: run configuration, model and provenance enums
- Logging: structlog setup and run context

Version: 0.1.0
"""

from .config import (
    DimerFoldConfig,
    get_config,
    load_config,
    reset_config,
)
from .exceptions import (
    CLIError,
    ConfigError,
    ConfigNotFoundError,
    ConfigParseError,
    ConfigValidationError,
    DimerFoldError,
    DomainError,
    EnumerationCapError,
    GraphError,
    InvariantError,
    NumericalError,
    OracleError,
    SingularMatrixError,
    ToleranceError,
    ZipperError,
)
from .models import Model, Provenance, RunConfig, load_run_config

__all__ = [
    # Config
    "DimerFoldConfig",
    "get_config",
    "load_config",
    "reset_config",
    # Exceptions
    "CLIError",
    "ConfigError",
    "ConfigNotFoundError",
    "ConfigParseError",
    "ConfigValidationError",
    "DimerFoldError",
    "DomainError",
    "EnumerationCapError",
    "GraphError",
    "InvariantError",
    "NumericalError",
    "OracleError",
    "SingularMatrixError",
    "ToleranceError",
    "ZipperError",
    # Models
    "Model",
    "Provenance",
    "RunConfig",
    "load_run_config",
]
