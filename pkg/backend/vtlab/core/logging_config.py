"""
Logging setup for vtlab processes

Library modules only ask for loggers; the command line configures handlers once per process.
Records carry a ``LogContext`` (run, seed, stage, iteration) that both formatters render:
plain text for terminals, one JSON object per line for files and log collectors.
"""
import json
import logging
import logging.config
import sys
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Optional


class LogLevel(str, Enum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class LogCategory(str, Enum):
    """Pipeline area a record belongs to"""
    SYSTEM = "system"
    DATA = "data"
    TRAINING = "training"
    ROLLOUT = "rollout"
    EVALUATION = "evaluation"
    BENCH = "bench"
    CLI = "cli"
    PERSISTENCE = "persistence"


@dataclass(frozen=True)
class LogContext:
    run_id: Optional[str] = None
    seed: Optional[int] = None
    operation: Optional[str] = None
    iteration: Optional[int] = None
    category: LogCategory = LogCategory.SYSTEM

    def fields(self) -> Dict[str, Any]:
        """Non-empty context fields, category included."""
        out = {"category": self.category.value}
        for key in ("run_id", "seed", "operation", "iteration"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


# run-wide fields stamped on every record of the process
_run_context = LogContext()

# LogRecord attributes that are not caller-supplied extras
_RECORD_ATTRS = frozenset(vars(logging.LogRecord("", 0, "", 0, "", (), None))) | {"context", "message", "asctime"}


def bind_run(run_id: Optional[str] = None, seed: Optional[int] = None) -> None:
    """Attach the run id and seed to every record logged from now on."""
    global _run_context
    _run_context = LogContext(run_id=run_id, seed=seed)


class JsonLineFormatter(logging.Formatter):
    """One JSON object per record, keys sorted"""

    def format(self, record: logging.LogRecord) -> str:
        entry: Dict[str, Any] = {
            "ts": datetime.fromtimestamp(record.created, timezone.utc).isoformat(timespec="milliseconds"),
            "level": record.levelname,
            "logger": record.name,
            "msg": record.getMessage(),
        }
        context = getattr(record, "context", None)
        if isinstance(context, LogContext):
            entry.update(context.fields())
        for key, value in record.__dict__.items():
            if key not in _RECORD_ATTRS and not key.startswith("_"):
                entry[key] = value
        if record.exc_info:
            entry["exc_type"] = record.exc_info[0].__name__
            entry["exc"] = self.formatException(record.exc_info)
        return json.dumps(entry, sort_keys=True, default=str)


class TerminalFormatter(logging.Formatter):
    """``HH:MM:SS LEVEL category/operation[#it] message``, colored when the stream is a tty"""

    LEVEL_COLORS = {"DEBUG": "\033[2m", "WARNING": "\033[33m", "ERROR": "\033[31m", "CRITICAL": "\033[1;31m"}

    def __init__(self, color: Optional[bool] = None):
        super().__init__()
        self.color = sys.stderr.isatty() if color is None else color

    def format(self, record: logging.LogRecord) -> str:
        stamp = datetime.fromtimestamp(record.created).strftime("%H:%M:%S")
        where = record.name.removeprefix("vtlab.")
        context = getattr(record, "context", None)
        if isinstance(context, LogContext):
            where = context.category.value + (f"/{context.operation}" if context.operation else "")
            if context.iteration is not None:
                where += f"#{context.iteration}"
        line = f"{stamp} {record.levelname:<7} {where:<28} {record.getMessage()}"
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        start = self.LEVEL_COLORS.get(record.levelname, "") if self.color else ""
        return f"{start}{line}\033[0m" if start else line


def logging_dict(level: LogLevel, structured: bool = False, log_file: Optional[str] = None) -> Dict[str, Any]:
    """dictConfig payload: console on stderr, optional rotating JSON file."""
    handlers: Dict[str, Dict[str, Any]] = {
        "console": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "json" if structured else "terminal",
            "level": level.value,
        }
    }
    if log_file:
        handlers["file"] = {
            "class": "logging.handlers.RotatingFileHandler",
            "filename": log_file,
            "maxBytes": 10 * 1024 * 1024,
            "backupCount": 3,
            "encoding": "utf-8",
            "formatter": "json",
            "level": level.value,
        }
    active: List[str] = list(handlers)
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "json": {"()": JsonLineFormatter},
            "terminal": {"()": TerminalFormatter},
        },
        "handlers": handlers,
        "loggers": {
            "vtlab": {"level": level.value, "handlers": active, "propagate": False},
            # loky worker chatter
            "joblib": {"level": "WARNING", "handlers": active, "propagate": False},
        },
        "root": {"level": "WARNING", "handlers": active},
    }


def configure_logging(level: LogLevel = LogLevel.INFO,
                      enable_structured_logging: bool = False,
                      log_file: Optional[str] = None) -> None:
    """Install handlers for the whole process. Called by the command line only."""
    logging.config.dictConfig(logging_dict(level, enable_structured_logging, log_file))
    logging.getLogger(__name__).debug(
        "logging configured", extra={"context": LogContext(operation="configure_logging")}
    )


class ContextualLogger:
    """
    Thin wrapper over a stdlib logger that stamps a ``LogContext`` on every record.

    The context merges, from weakest to strongest: the logger's default category, the
    run-wide fields from ``bind_run`` and the per-call ``operation``/``iteration``/``seed``.
    """

    def __init__(self, logger: logging.Logger, default_category: LogCategory = LogCategory.SYSTEM):
        self.logger = logger
        self.default_category = default_category

    def _emit(self, level: int, message: str, category: Optional[LogCategory] = None,
              operation: Optional[str] = None, iteration: Optional[int] = None, seed: Optional[int] = None,
              exception: Optional[BaseException] = None, **extra: Any) -> None:
        if not self.logger.isEnabledFor(level):
            return
        context = replace(
            _run_context,
            category=category or self.default_category,
            operation=operation,
            iteration=iteration,
            seed=seed if seed is not None else _run_context.seed,
        )
        exc_info = (type(exception), exception, exception.__traceback__) if exception is not None else None
        self.logger.log(level, message, exc_info=exc_info, extra={"context": context, **extra}, stacklevel=3)

    def debug(self, message: str, **kwargs: Any) -> None:
        self._emit(logging.DEBUG, message, **kwargs)

    def info(self, message: str, **kwargs: Any) -> None:
        self._emit(logging.INFO, message, **kwargs)

    def warning(self, message: str, **kwargs: Any) -> None:
        self._emit(logging.WARNING, message, **kwargs)

    def error(self, message: str, exception: Optional[BaseException] = None, **kwargs: Any) -> None:
        self._emit(logging.ERROR, message, exception=exception, **kwargs)

    # per-area shorthands
    def training_info(self, message: str, operation: str, iteration: Optional[int] = None, **kwargs: Any) -> None:
        self._emit(logging.INFO, message, LogCategory.TRAINING, operation, iteration, **kwargs)

    def training_debug(self, message: str, operation: str, iteration: Optional[int] = None, **kwargs: Any) -> None:
        self._emit(logging.DEBUG, message, LogCategory.TRAINING, operation, iteration, **kwargs)

    def rollout_info(self, message: str, operation: str, **kwargs: Any) -> None:
        self._emit(logging.INFO, message, LogCategory.ROLLOUT, operation, **kwargs)

    def data_info(self, message: str, operation: str, **kwargs: Any) -> None:
        self._emit(logging.INFO, message, LogCategory.DATA, operation, **kwargs)

    def bench_info(self, message: str, operation: str, seed: Optional[int] = None, **kwargs: Any) -> None:
        self._emit(logging.INFO, message, LogCategory.BENCH, operation, seed=seed, **kwargs)

    def persistence_info(self, message: str, operation: str, **kwargs: Any) -> None:
        self._emit(logging.INFO, message, LogCategory.PERSISTENCE, operation, **kwargs)


def get_logger(name: str, category: LogCategory = LogCategory.SYSTEM) -> ContextualLogger:
    return ContextualLogger(logging.getLogger(name), category)
