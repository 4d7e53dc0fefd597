"""Cross-cutting infrastructure shared by every pipeline stage."""
from .logging_config import (
    ContextualLogger,
    LogCategory,
    LogContext,
    LogLevel,
    bind_run,
    configure_logging,
    get_logger,
)

__all__ = [
    "ContextualLogger",
    "LogCategory",
    "LogContext",
    "LogLevel",
    "bind_run",
    "configure_logging",
    "get_logger",
]
