"""
Logger utility - centralized logging configuration.

LOG_LEVEL in the environment sets the default level; the command line can
override it for every logger handed out so far with ``set_log_level``.
"""

import logging
import os
from typing import Dict, Optional

_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
_configured: Dict[str, logging.Logger] = {}
_override: Optional[str] = None


def _resolve(level: Optional[str]) -> int:
    name = (level or _override or os.getenv("LOG_LEVEL", "INFO")).upper()
    resolved = logging.getLevelName(name)
    return resolved if isinstance(resolved, int) else logging.INFO


def get_logger(name: str, level: Optional[str] = None) -> logging.Logger:
    """
    Get configured logger instance.

    Args:
        name: Logger name (typically __name__)
        level: Log level override

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_FORMAT))
        logger.addHandler(handler)
        logger.propagate = False

    logger.setLevel(_resolve(level))
    _configured[name] = logger
    return logger


def set_log_level(level: str) -> None:
    """Apply ``level`` to every logger obtained through get_logger, now and later."""
    global _override
    _override = level
    for logger in _configured.values():
        logger.setLevel(_resolve(level))
