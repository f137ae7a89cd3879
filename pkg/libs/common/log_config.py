"""
Structured Logging
structlog setup shared by the library and the command-line driver
"""
import logging
import sys
from typing import Any

import structlog


def configure_logging(level: str = "WARNING", json: bool = False) -> None:
    """
    Configure structlog for the current process

    Args:
        level: Minimum level name (DEBUG, INFO, WARNING, ...)
        json: Render events as JSON lines instead of console text
    """
    numeric_level = logging.getLevelName(level.upper())
    if not isinstance(numeric_level, int):
        numeric_level = logging.WARNING

    renderer: Any = (
        structlog.processors.JSONRenderer() if json else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric_level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def get_logger(name: str) -> Any:
    """Return a structlog logger bound to a module name"""
    return structlog.get_logger(name).bind(module=name)
