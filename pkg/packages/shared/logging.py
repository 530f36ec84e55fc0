"""
Structured logging for gl-duality.

Every event is a key/value record:
- JSON lines when APP_ENV=production
- colored console output otherwise

Logs go to stderr so reports written to stdout stay machine-readable.
"""

import logging
import sys
from functools import lru_cache

import structlog

from packages.core.config import get_settings

_configured = False


def configure_logging(level: str | None = None, *, force: bool = False) -> None:
    """Configure structlog once per process."""
    global _configured
    if _configured and not force:
        return

    settings = get_settings()
    level_name = (level or settings.log_level).upper()
    log_level = getattr(logging, level_name, logging.INFO)

    renderer: structlog.typing.Processor
    if settings.is_production:
        renderer = structlog.processors.JSONRenderer()
    else:
        renderer = structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty())

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(log_level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
    _configured = True


@lru_cache
def get_logger(name: str = "gl_duality") -> structlog.typing.FilteringBoundLogger:
    """Get a logger tagged with a module name."""
    configure_logging()
    logger: structlog.typing.FilteringBoundLogger = structlog.get_logger(logger_name=name)
    return logger
