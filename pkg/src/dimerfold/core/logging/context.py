"""Logging context for dimerfold runs.

Context variables bound here are merged into every log event by the
``merge_contextvars`` processor, so a CLI run can tag all library logs with
its command, seed and run id without threading them through call signatures.

Version: 0.1.0
"""

from __future__ import annotations

import uuid
from contextlib import contextmanager
from typing import TYPE_CHECKING, Any

import structlog

if TYPE_CHECKING:
    from collections.abc import Generator

__all__ = [
    "bind_context",
    "clear_context",
    "get_context",
    "unbind_context",
    "logging_context",
    "run_context",
]


def bind_context(**kwargs: Any) -> None:
    """Bind key-value pairs to every subsequent log event.

    Example:
        >>> bind_context(command="moments", seed=7)
        >>> get_logger(__name__).info("sampling")  # carries command and seed
    """
    structlog.contextvars.bind_contextvars(**kwargs)


def unbind_context(*keys: str) -> None:
    """Remove specific keys from the logging context."""
    structlog.contextvars.unbind_contextvars(*keys)


def clear_context() -> None:
    """Clear all context variables."""
    structlog.contextvars.clear_contextvars()


def get_context() -> dict[str, Any]:
    """Return the currently bound context."""
    return structlog.contextvars.get_contextvars()


@contextmanager
def logging_context(**kwargs: Any) -> Generator[None, None, None]:
    """Bind context for the duration of a block, then unbind only those keys.

    Example:
        >>> with logging_context(model="folded", alpha=0.25):
        ...     logger.info("identity_row")
    """
    bind_context(**kwargs)
    try:
        yield
    finally:
        unbind_context(*kwargs.keys())


@contextmanager
def run_context(
    command: str, seed: int | None = None, run_id: str | None = None
) -> Generator[str, None, None]:
    """Tag all logs of one CLI run; yields the run id."""
    rid = run_id or uuid.uuid4().hex[:12]
    with logging_context(command=command, seed=seed, run_id=rid):
        yield rid
