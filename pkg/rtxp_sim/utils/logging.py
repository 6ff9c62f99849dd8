"""
Logging setup and the per-transmission trace.

This module configures the package logger for CLI runs and provides a
plain-text trace of every evaluated transmission.
"""

import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

from rtxp_sim.core.config import LOG_LEVEL, get_data_dir

# Set up logger
logger = logging.getLogger("rtxp_sim")

trace_logger = logging.getLogger("rtxp_sim.trace")
trace_logger.propagate = False

FORMAT = '%(asctime)s.%(msecs)03d - %(name)s - %(levelname)s - %(message)s'
DATEFMT = '%Y-%m-%d %H:%M:%S'


# Default log directory is 'logs' in the data directory
def get_log_dir():
    """Get the log directory."""
    log_dir = os.path.join(get_data_dir(), "logs")
    Path(log_dir).mkdir(parents=True, exist_ok=True)
    return log_dir


def setup_logging(level: str = LOG_LEVEL, log_file: Optional[str] = None, to_file: bool = False):
    """
    Set up logging for simulation runs.

    Args:
        level: logging level name for the package logger
        log_file: Optional custom log file path.
        to_file: write a dated log file in the logs directory when no path is given
    """
    logger.setLevel(level.upper())
    formatter = logging.Formatter(FORMAT, datefmt=DATEFMT)

    if not any(isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)
               for h in logger.handlers):
        console = logging.StreamHandler()
        console.setFormatter(formatter)
        logger.addHandler(console)

    if not log_file and to_file:
        timestamp = datetime.now().strftime("%Y%m%d")
        log_file = os.path.join(get_log_dir(), f"rtxp_sim_{timestamp}.log")

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def enable_transmission_trace(path: str, mode: str = "a") -> logging.Handler:
    """Send one line per evaluated transmission to path."""
    handler = logging.FileHandler(path, mode=mode)
    handler.setFormatter(logging.Formatter("%(message)s"))
    trace_logger.addHandler(handler)
    trace_logger.setLevel(logging.DEBUG)
    return handler


def disable_transmission_trace(handler: logging.Handler) -> None:
    trace_logger.removeHandler(handler)
    handler.close()


def trace_enabled() -> bool:
    return trace_logger.isEnabledFor(logging.DEBUG) and bool(trace_logger.handlers)


def log_transmission(time_us: int, sender: int, kind: str, receivers: Iterable[int], outcome: str):
    """
    Write a trace line: time, sender, kind, receivers, outcome.

    Args:
        time_us: end of the emission
        sender: emitting node
        kind: transmission kind label
        receivers: nodes the outcome was evaluated for
        outcome: summary such as "delivered" or "3/4"
    """
    try:
        listed = ",".join(str(r) for r in receivers) or "-"
        trace_logger.debug(f"{time_us} {sender} {kind} {listed} {outcome}")
    except Exception as e:
        logger.error(f"error writing transmission trace: {e}")
