"""
Configuration service for environment-based configuration management.
Provides environment variable validation and run defaults for the CLI.
"""
import os
from typing import Optional, Tuple
from dataclasses import dataclass


class ConfigurationError(Exception):
    """Raised when configuration validation fails."""
    pass


@dataclass
class AppConfig:
    """Application configuration data class."""
    log_level: str
    log_json: bool
    max_iter: int
    dimension: int
    workers: int
    b_range: Tuple[float, float]


class ConfigService:
    """Service for managing environment-based configuration."""

    PREFIX = "GRADFAMILY_"

    def __init__(self):
        """Initialize configuration service."""
        self._config: Optional[AppConfig] = None
        self._load_configuration()

    def _env(self, name: str, default: str) -> str:
        return os.getenv(f"{self.PREFIX}{name}", default)

    def _load_configuration(self) -> None:
        """Load configuration from environment variables."""
        log_level = self._env("LOG_LEVEL", "WARNING")
        log_json = self._parse_boolean(self._env("LOG_JSON", "false"))
        max_iter = self._parse_int(self._env("MAX_ITER", "20000"))
        dimension = self._parse_int(self._env("DIMENSION", "1000"))
        workers = self._parse_int(self._env("WORKERS", "1"))
        b_range = self.parse_interval(self._env("B_RANGE", "-10:10"))

        self._config = AppConfig(
            log_level=log_level,
            log_json=log_json,
            max_iter=max_iter,
            dimension=dimension,
            workers=workers,
            b_range=b_range,
        )

    def _parse_boolean(self, value: str) -> bool:
        """Parse string to boolean."""
        return value.lower() in ('true', '1', 'yes', 'on')

    def _parse_int(self, value: str) -> int:
        """Parse string to integer."""
        try:
            return int(value)
        except ValueError:
            raise ConfigurationError(f"Invalid integer value: {value}")

    @staticmethod
    def parse_interval(value: str) -> Tuple[float, float]:
        """Parse a `lo:hi` interval string."""
        parts = value.split(":")
        if len(parts) != 2:
            raise ConfigurationError(f"Invalid interval '{value}'. Expected 'lo:hi'.")
        try:
            lo, hi = float(parts[0]), float(parts[1])
        except ValueError:
            raise ConfigurationError(f"Invalid interval '{value}'. Bounds must be numbers.")
        if not lo < hi:
            raise ConfigurationError(f"Invalid interval '{value}'. Need lo < hi.")
        return lo, hi

    def get_config(self) -> AppConfig:
        """Get application configuration."""
        if self._config is None:
            self._load_configuration()
        return self._config

    def validate_environment(self) -> None:
        """Validate environment configuration and fail fast if invalid."""
        config = self.get_config()

        valid_log_levels = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        if config.log_level.upper() not in valid_log_levels:
            raise ConfigurationError(
                f"Invalid GRADFAMILY_LOG_LEVEL '{config.log_level}'. "
                f"Must be one of: {', '.join(valid_log_levels)}"
            )

        if config.max_iter < 1:
            raise ConfigurationError(
                f"Invalid GRADFAMILY_MAX_ITER '{config.max_iter}'. Must be at least 1."
            )

        if config.dimension < 2:
            raise ConfigurationError(
                f"Invalid GRADFAMILY_DIMENSION '{config.dimension}'. Must be at least 2."
            )

        if config.workers < 1:
            raise ConfigurationError(
                f"Invalid GRADFAMILY_WORKERS '{config.workers}'. Must be at least 1."
            )
