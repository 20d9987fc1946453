"""dimerfold Logging System.

Structured logging using structlog.

This module provides:
- configure_logging(): Configure the logging system
- get_logger(): Get a structured logger instance
- bind_context() / logging_context() / run_context(): contextual fields

Version: 0.1.0

Example:
    >>> from dimerfold.core.logging import configure_logging, get_logger
    >>> configure_logging(level="DEBUG")
    >>> logger = get_logger("dimerfold.capabilities.sampler")
    >>> logger.debug("inverse_refreshed", remaining=120)
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import structlog

from .config import (
    LogFormat,
    LogLevel,
    configure_logging,
    get_default_processors,
    reset_logging,
)
from .context import (
    bind_context,
    clear_context,
    get_context,
    logging_context,
    run_context,
    unbind_context,
)

if TYPE_CHECKING:
    from structlog.typing import FilteringBoundLogger

__all__ = [
    # Configuration
    "configure_logging",
    "reset_logging",
    "get_default_processors",
    "LogLevel",
    "LogFormat",
    # Logger factory
    "get_logger",
    # Context management
    "bind_context",
    "unbind_context",
    "clear_context",
    "get_context",
    "logging_context",
    "run_context",
]


def get_logger(name: str | None = None) -> FilteringBoundLogger:
    """Get a structlog logger bound to ``name`` (usually ``__name__``)."""
    return structlog.get_logger(name)  # type: ignore[no-any-return]
