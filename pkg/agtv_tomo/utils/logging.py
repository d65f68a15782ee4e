"""Logging configuration for agtv-tomo"""

import logging
import sys
from pathlib import Path
from typing import Optional


def setup_logging(
    log_file: Optional[str] = "agtv_tomo.log",
    level: str = "INFO",
    quiet: bool = False,
) -> None:
    """
    Configure logging to a file and to stderr.

    Stdout stays free for command output; ``quiet`` keeps only warnings and
    errors on stderr while the log file still receives everything.

    Args:
        log_file: Log file name relative to the working directory (None disables it)
        level: Root log level name
        quiet: Only warnings and errors on stderr
    """
    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setLevel(logging.WARNING if quiet else level)
    handlers: list[logging.Handler] = [stream_handler]

    log_path = None
    if log_file:
        log_path = Path.cwd() / log_file
        handlers.append(logging.FileHandler(log_path))

    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )

    logger = logging.getLogger(__name__)
    logger.info(f"Logging configured to {log_path or 'stderr'}")
