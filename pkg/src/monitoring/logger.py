"""Structured logging configuration.

Records go to stderr (and optionally a file); stdout carries only the CLI's
JSON result lines.
"""

import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from src.config.settings import settings

# Libraries that log every file-format check at DEBUG
QUIET_LOGGERS = ("PIL",)


def _jsonable(value: Any) -> Any:
    """Context values as plain JSON types (numpy scalars and arrays included)."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    return value


class JSONFormatter(logging.Formatter):
    """One JSON object per record, context fields merged at the top level."""

    def format(self, record: logging.LogRecord) -> str:
        log_data: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno
        }
        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)
        for key, value in getattr(record, "extra_fields", {}).items():
            log_data[key] = _jsonable(value)
        return json.dumps(log_data, default=str)


class TextFormatter(logging.Formatter):
    """Human-readable single-line records."""

    def __init__(self):
        super().__init__(
            fmt="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S"
        )


def _build_handlers(formatter: logging.Formatter, level: int, log_file: Optional[Path]) -> List[logging.Handler]:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    for handler in handlers:
        handler.setLevel(level)
        handler.setFormatter(formatter)
    return handlers


def setup_logging(
    log_level: Optional[str] = None,
    log_format: Optional[str] = None,
    log_file: Optional[Path] = None
) -> None:
    """Configure the root logger, replacing any existing handlers.

    Args:
        log_level: DEBUG, INFO, WARNING or ERROR (default: CLAD_LOG_LEVEL)
        log_format: "json" or "text" (default: CLAD_LOG_FORMAT)
        log_file: Extra file destination (default: CLAD_LOG_FILE)
    """
    log_level = log_level or settings.log_level
    log_format = log_format or settings.log_format
    log_file = log_file or settings.log_file
    numeric_level = getattr(logging, log_level.upper(), logging.INFO)
    formatter = JSONFormatter() if log_format == "json" else TextFormatter()

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)
    root_logger.handlers.clear()
    for handler in _build_handlers(formatter, numeric_level, log_file):
        root_logger.addHandler(handler)

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    root_logger.debug(f"Logging configured: level={log_level}, format={log_format}")


def log_with_context(logger: logging.Logger, level: str, message: str, **context):
    """Log `message` with `context` attached as structured fields.

    Args:
        logger: Logger instance
        level: "debug", "info", "warning", "error" or "critical"
        message: Log message
        **context: Fields the JSON formatter merges into the record
    """
    getattr(logger, level.lower())(message, extra={"extra_fields": context})
