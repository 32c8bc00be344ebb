"""
Logging Setup for dsedge
========================

One place to configure the package logger for CLI and library use.
"""

import logging
import os
import sys
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DEFAULT_LEVEL = "WARNING"

_configured = False


def resolve_level(level: Optional[str] = None) -> str:
    """Pick the log level: explicit argument, then DSEDGE_LOG_LEVEL, then default."""
    chosen = level or os.getenv("DSEDGE_LOG_LEVEL") or DEFAULT_LEVEL
    chosen = chosen.upper()
    if chosen not in logging._nameToLevel:
        raise ValueError(f"Unknown log level: {chosen}")
    return chosen


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> logging.Logger:
    """
    Configure the ``dsedge`` logger.

    Logs always go to stderr so CSV written to stdout stays clean.
    Calling this again only adjusts the level.

    Args:
        level: Level name (DEBUG, INFO, WARNING, ERROR)
        log_file: Optional file that receives a copy of every record
            (default: DSEDGE_LOG_FILE)

    Returns:
        The configured package logger
    """
    global _configured

    logger = logging.getLogger("dsedge")
    logger.setLevel(resolve_level(level))

    log_file = log_file or os.getenv("DSEDGE_LOG_FILE")
    if not _configured:
        formatter = logging.Formatter(LOG_FORMAT)

        stream_handler = logging.StreamHandler(sys.stderr)
        stream_handler.setFormatter(formatter)
        logger.addHandler(stream_handler)

        if log_file:
            file_handler = logging.FileHandler(log_file, encoding="utf-8")
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

        logger.propagate = False
        _configured = True

    return logger
