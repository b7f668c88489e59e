"""
Test environment-based configuration.
"""
import os
import pytest
from unittest.mock import patch
from pathlib import Path
import sys

# Add the src directory to Python path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / "src"))

from gradfamily.core.config import ConfigService, ConfigurationError


class TestConfigService:
    """Test ConfigService loading and validation."""

    def test_defaults(self):
        """Test defaults when no variables are set."""
        with patch.dict(os.environ, {}, clear=True):
            config = ConfigService().get_config()

        assert config.log_level == "WARNING"
        assert config.log_json is False
        assert config.max_iter == 20000
        assert config.dimension == 1000
        assert config.workers == 1
        assert config.b_range == (-10.0, 10.0)

    def test_environment_overrides(self):
        """Test GRADFAMILY_ variables override defaults."""
        env = {
            "GRADFAMILY_LOG_LEVEL": "DEBUG",
            "GRADFAMILY_LOG_JSON": "yes",
            "GRADFAMILY_MAX_ITER": "500",
            "GRADFAMILY_DIMENSION": "64",
            "GRADFAMILY_WORKERS": "4",
            "GRADFAMILY_B_RANGE": "-1:1",
        }
        with patch.dict(os.environ, env, clear=True):
            service = ConfigService()
            service.validate_environment()
            config = service.get_config()

        assert config.log_level == "DEBUG"
        assert config.log_json is True
        assert config.max_iter == 500
        assert config.dimension == 64
        assert config.workers == 4
        assert config.b_range == (-1.0, 1.0)

    def test_invalid_integer(self):
        """Test non-integer values fail at load time."""
        with patch.dict(os.environ, {"GRADFAMILY_MAX_ITER": "lots"}, clear=True):
            with pytest.raises(ConfigurationError, match="Invalid integer"):
                ConfigService()

    @pytest.mark.parametrize("name,value", [
        ("GRADFAMILY_LOG_LEVEL", "LOUD"),
        ("GRADFAMILY_MAX_ITER", "0"),
        ("GRADFAMILY_DIMENSION", "1"),
        ("GRADFAMILY_WORKERS", "0"),
    ])
    def test_validate_environment_rejects(self, name, value):
        """Test fail-fast validation of out-of-range settings."""
        with patch.dict(os.environ, {name: value}, clear=True):
            service = ConfigService()
            with pytest.raises(ConfigurationError, match=name):
                service.validate_environment()


def test_parse_interval():
    """Test lo:hi parsing and its errors."""
    assert ConfigService.parse_interval("-10:10") == (-10.0, 10.0)
    assert ConfigService.parse_interval("0.5:2e3") == (0.5, 2000.0)

    for bad in ("1", "1:2:3", "a:b", "3:3", "5:1"):
        with pytest.raises(ConfigurationError):
            ConfigService.parse_interval(bad)


def test_bad_interval_in_environment():
    """Test an invalid B_RANGE is reported at load time."""
    with patch.dict(os.environ, {"GRADFAMILY_B_RANGE": "10:-10"}, clear=True):
        with pytest.raises(ConfigurationError, match="lo < hi"):
            ConfigService()
