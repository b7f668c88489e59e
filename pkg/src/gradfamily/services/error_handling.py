"""
Error handling service for CLI failures.
Turns exceptions into structured error records and process exit codes.
"""
import hashlib
import json
import sys
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from gradfamily.core.config import ConfigurationError
from gradfamily.core.logging import get_logger
from gradfamily.models.schedule import ScheduleParseError
from gradfamily.services.asymptotics import DynamicsError
from gradfamily.services.bench_harness import GridError, ProfileError
from gradfamily.services.quadratic_model import ProblemConstructionError
from gradfamily.services.stepsize_engine import StepsizeError

logger = get_logger("error_handling")

EXIT_OK = 0
EXIT_ITER_CAP = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64
EXIT_INTERNAL = 70

STATUS_EXIT_CODES = {
    "converged": EXIT_OK,
    "iter_cap": EXIT_ITER_CAP,
    "numerical_failure": EXIT_NUMERICAL,
}

USAGE_ERRORS = (
    ScheduleParseError,
    ConfigurationError,
    ProblemConstructionError,
    GridError,
    ProfileError,
    ValueError,
    FileNotFoundError,
)


@dataclass
class ErrorDetails:
    """Detailed error information for a specific field."""
    field: str
    message: str
    type: str


class RunIdGenerator:
    """Deterministic run IDs derived from the command line."""

    def generate(self, argv: Sequence[str]) -> str:
        """
        Hash the arguments into a short ID.

        Args:
            argv: Command-line arguments, without the program name

        Returns:
            12-character hex ID, identical for identical arguments
        """
        digest = hashlib.blake2b("\x00".join(argv).encode("utf-8"), digest_size=6)
        return digest.hexdigest()


class ErrorHandlingService:
    """Service for turning exceptions into structured error records."""

    def __init__(self, stream=None):
        """Initialize the error handling service."""
        self.run_id_generator = RunIdGenerator()
        self.stream = stream

    def exit_code_for(self, error: BaseException) -> int:
        if isinstance(error, (ValidationError,) + USAGE_ERRORS):
            return EXIT_USAGE
        if isinstance(error, (StepsizeError, DynamicsError, FloatingPointError)):
            return EXIT_NUMERICAL
        return EXIT_INTERNAL

    def handle_validation_error(self, validation_error: ValidationError, run_id: str) -> Dict[str, Any]:
        """
        Convert pydantic validation errors to a structured record.

        Args:
            validation_error: Pydantic ValidationError
            run_id: Run ID for tracking

        Returns:
            Structured error dictionary
        """
        details: List[Dict[str, str]] = []
        for error in validation_error.errors():
            field_path = ".".join(str(loc) for loc in error["loc"])
            details.append(asdict(ErrorDetails(field=field_path, message=error["msg"], type=error["type"])))
        record = {
            "error": "Validation failed",
            "details": details,
            "run_id": run_id,
            "exit_code": EXIT_USAGE,
        }
        self.log_error("Validation error occurred", run_id, {"validation_errors": details})
        return record

    def handle_exception(self, error: BaseException, run_id: str) -> Dict[str, Any]:
        """
        Convert any exception to a structured record with its exit code.

        Args:
            error: The exception raised by a command
            run_id: Run ID for tracking

        Returns:
            Structured error dictionary
        """
        if isinstance(error, ValidationError):
            return self.handle_validation_error(error, run_id)
        exit_code = self.exit_code_for(error)
        record = {
            "error": str(error) or type(error).__name__,
            "details": [asdict(ErrorDetails(field="", message=str(error), type=type(error).__name__))],
            "run_id": run_id,
            "exit_code": exit_code,
        }
        if exit_code == EXIT_INTERNAL:
            logger.exception(f"Unexpected error [run_id: {run_id}]", extra={"run_id": run_id})
        else:
            self.log_error(f"{type(error).__name__}: {error}", run_id)
        return record

    def create_usage_error(self, message: str, run_id: str) -> Dict[str, Any]:
        """Record for command-line usage errors."""
        return {
            "error": message,
            "details": [asdict(ErrorDetails(field="argv", message=message, type="usage_error"))],
            "run_id": run_id,
            "exit_code": EXIT_USAGE,
        }

    def emit(self, record: Dict[str, Any]) -> int:
        """Write the record to stderr as one JSON line and return its exit code."""
        stream = self.stream or sys.stderr
        stream.write(json.dumps(record, default=str) + "\n")
        return int(record["exit_code"])

    def log_error(self, message: str, run_id: str, error_details: Optional[Dict[str, Any]] = None) -> None:
        """
        Log error with run ID for tracking.

        Args:
            message: Error message to log
            run_id: Run ID of the failing command
            error_details: Optional additional error details
        """
        log_data = {"run_id": run_id}
        if error_details:
            log_data.update(error_details)
        logger.error(f"Error occurred - {message} [run_id: {run_id}]", extra={"details": log_data, "run_id": run_id})
