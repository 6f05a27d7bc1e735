"""logger.py
Structured logging utilities for the capgram toolkit.
"""
import logging
import os
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
load_dotenv()


def get_logger(
    name: str = "capgram",
    level: Optional[int] = None,
    log_path: Optional[Path] = None,
) -> logging.Logger:
    """Return a configured logger with console and rotating file handlers.

    Parameters
    - name: Logger name
    - level: Logging level; defaults to CAPGRAM_LOG_LEVEL or INFO
    - log_path: Optional explicit path for the log file; defaults to CAPGRAM_LOG_PATH
      or capgram.log next to this file
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    if level is None:
        level = logging.getLevelName(os.getenv("CAPGRAM_LOG_LEVEL", "INFO").upper())
        if not isinstance(level, int):
            level = logging.INFO
    logger.setLevel(level)
    logger.propagate = False
    formatter = logging.Formatter("%(asctime)s %(levelname)s %(name)s - %(message)s")

    # Console handler (stderr, so command output on stdout stays clean)
    ch = logging.StreamHandler()
    ch.setFormatter(formatter)
    logger.addHandler(ch)

    # Rotating file handler
    if log_path is None:
        env_path = os.getenv("CAPGRAM_LOG_PATH")
        log_path = Path(env_path) if env_path else Path(__file__).with_name("capgram.log")
    try:
        fh = RotatingFileHandler(log_path, maxBytes=1_000_000, backupCount=3)
    except OSError as e:
        logger.warning(f"File logging disabled, cannot open {log_path}: {e}")
        return logger
    fh.setFormatter(formatter)
    logger.addHandler(fh)

    return logger
