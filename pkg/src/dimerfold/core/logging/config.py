"""Logging configuration for dimerfold.

structlog is configured once per process (by the CLI, or by library users)
with either a coloured console renderer or JSON lines on stderr. Numpy
scalars in event dicts are converted to plain Python numbers so JSON logs
stay serializable.

Version: 0.1.0
"""

from __future__ import annotations

import logging
import sys
from enum import Enum
from typing import TYPE_CHECKING, Any

import numpy as np
import structlog

if TYPE_CHECKING:
    from collections.abc import MutableMapping, Sequence

__all__ = [
    "LogLevel",
    "LogFormat",
    "configure_logging",
    "get_default_processors",
    "reset_logging",
]


class LogLevel(str, Enum):
    """Supported log levels."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class LogFormat(str, Enum):
    """Output format for log messages."""

    CONSOLE = "console"
    JSON = "json"


def _unwrap_numpy(
    logger: Any, method_name: str, event_dict: MutableMapping[str, Any]
) -> MutableMapping[str, Any]:
    """Replace numpy scalars by Python scalars."""
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
    return event_dict


def get_default_processors(
    format_type: LogFormat = LogFormat.CONSOLE,
) -> Sequence[structlog.types.Processor]:
    """Return the processor chain for the given output format."""
    shared_processors: list[structlog.types.Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        _unwrap_numpy,
        structlog.processors.UnicodeDecoder(),
    ]

    if format_type == LogFormat.JSON:
        shared_processors.append(structlog.processors.JSONRenderer())
    else:
        shared_processors.append(
            structlog.dev.ConsoleRenderer(
                colors=True,
                exception_formatter=structlog.dev.plain_traceback,
            )
        )

    return shared_processors


def configure_logging(
    level: LogLevel | str = LogLevel.WARNING,
    format_type: LogFormat | str = LogFormat.CONSOLE,
    *,
    cache_logger: bool = True,
) -> None:
    """Configure structlog and the stdlib root logger.

    Logs go to stderr so that CLI tables and JSON reports on stdout stay
    clean.

    Example:
        >>> from dimerfold.core.logging import configure_logging, LogLevel
        >>> configure_logging(level=LogLevel.DEBUG, format_type="json")
    """
    if isinstance(level, str):
        level = LogLevel(level.upper())
    if isinstance(format_type, str):
        format_type = LogFormat(format_type.lower())

    numeric_level = getattr(logging, level.value)

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=numeric_level,
        force=True,
    )

    structlog.configure(
        processors=list(get_default_processors(format_type)),
        wrapper_class=structlog.make_filtering_bound_logger(numeric_level),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=cache_logger,
    )


def reset_logging() -> None:
    """Reset logging configuration to defaults (used by tests)."""
    structlog.reset_defaults()
    logging.root.handlers.clear()
