"""
Coloured log output for the library and CLI
"""

import logging
import sys
from typing import Optional

import colorlog

from .config import LOG_LEVEL

LOG_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(cyan)s%(name)s%(reset)s %(message)s"


def setup_logging(level: Optional[str] = None) -> logging.Logger:
    """
    Attach a single coloured stderr handler to the ``graphfkt`` logger

    Args:
        level: Level name, defaults to LOG_LEVEL from the environment

    Returns:
        The configured package logger
    """
    logger = logging.getLogger("graphfkt")
    logger.setLevel((level or LOG_LEVEL).upper())

    if not any(getattr(h, "_graphfkt", False) for h in logger.handlers):
        handler = colorlog.StreamHandler(sys.stderr)
        handler.setFormatter(colorlog.ColoredFormatter(
            LOG_FORMAT,
            log_colors={
                "DEBUG": "white",
                "INFO": "green",
                "WARNING": "yellow",
                "ERROR": "red",
                "CRITICAL": "bold_red",
            },
        ))
        handler._graphfkt = True
        logger.addHandler(handler)

    return logger
