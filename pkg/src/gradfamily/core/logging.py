"""
Logging infrastructure for gradfamily.
Provides structured logging with run IDs for tracing CLI invocations.
"""
import logging
import sys
from typing import Optional

JSON_FORMAT = (
    '{"timestamp": "%(asctime)s", "level": "%(levelname)s", "run_id": "%(run_id)s", '
    '"module": "%(name)s", "message": "%(message)s", "lineno": %(lineno)d}'
)
TEXT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class RunIdFilter(logging.Filter):
    """Stamps records with the invocation's run ID unless the call site passed one."""

    def __init__(self, run_id: str = "-"):
        super().__init__()
        self.run_id = run_id

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "run_id"):
            record.run_id = self.run_id
        return True


def setup_logging(log_level: str = "WARNING", enable_json: bool = False, run_id: str = "-") -> None:
    """
    Set up structured logging for one CLI invocation.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        enable_json: Whether to use JSON formatting for logs
        run_id: Run ID stamped on every record as the run_id field
    """
    formatter = logging.Formatter(JSON_FORMAT if enable_json else TEXT_FORMAT)

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, log_level.upper()))

    # Remove existing handlers to avoid duplicates
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    # stdout carries tables and CSV, so logs go to stderr
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler.addFilter(RunIdFilter(run_id))
    root_logger.addHandler(console_handler)


logger = logging.getLogger("gradfamily")


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Logger under the gradfamily namespace; the package logger when name is empty."""
    if name:
        return logging.getLogger(f"gradfamily.{name}")
    return logger
