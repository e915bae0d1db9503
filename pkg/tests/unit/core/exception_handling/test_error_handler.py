"""
Unit tests for the centralised exception handling.

This module tests the custom exceptions defined in error_handler.py and the
mapping from exceptions to process exit codes, verifying error codes,
details and the log level used for each kind of failure.
"""

import logging
from unittest.mock import patch

import pytest

from app.core.exception_handling.error_handler import (
    EXIT_OK,
    EXIT_RUNTIME_FAILURE,
    EXIT_USAGE_ERROR,
    AdjointBlowupError,
    BaseAppException,
    ConfigurationError,
    DegenerateRadiusError,
    DivergedSimulationError,
    FragmentBoundsError,
    InvalidArgumentError,
    InvalidBatchError,
    MissingSeedError,
    OptimizerHaltError,
    ProvenanceMismatchError,
    StabilityWarningError,
    handle_exception,
)


class TestExceptions:
    """Tests for the application exception hierarchy."""

    def test_base_exception_attributes(self):
        """Test that BaseAppException stores its fields."""
        exc = BaseAppException(
            error_code="BASE_TEST_ERROR", message="A base error", details={"info": 1}
        )
        assert exc.error_code == "BASE_TEST_ERROR"
        assert exc.message == "A base error"
        assert exc.exit_code == EXIT_RUNTIME_FAILURE
        assert exc.details == {"info": 1}
        assert str(exc) == "A base error"

    def test_exit_codes_differ(self):
        """Test the exit code constants."""
        assert (EXIT_OK, EXIT_RUNTIME_FAILURE, EXIT_USAGE_ERROR) == (0, 1, 2)

    @pytest.mark.parametrize(
        "exc, error_code, details",
        [
            (InvalidArgumentError("bad", dt=-1.0), "INVALID_ARGUMENT", {"dt": -1.0}),
            (StabilityWarningError("too stiff", ratio=1.2), "STABILITY_WARNING", {"ratio": 1.2}),
            (DivergedSimulationError(step=5), "DIVERGED_SIMULATION", {"step": 5}),
            (DegenerateRadiusError(radius=0.0), "DEGENERATE_RADIUS", {"radius": 0.0}),
            (
                AdjointBlowupError(step=10, sample_id=3),
                "ADJOINT_BLOWUP",
                {"step": 10, "sample_id": 3},
            ),
            (InvalidBatchError(n_gen=1), "INVALID_BATCH", {"n_gen": 1}),
            (ProvenanceMismatchError(origin="data"), "PROVENANCE_MISMATCH", {"origin": "data"}),
            (FragmentBoundsError("out", k=4), "FRAGMENT_BOUNDS", {"k": 4}),
            (MissingSeedError(), "MISSING_SEED", {}),
            (OptimizerHaltError("kbt"), "OPTIMIZER_HALT", {"channel": "kbt"}),
        ],
    )
    def test_runtime_errors(self, exc, error_code, details):
        """Test error codes and details of the runtime failures."""
        assert exc.error_code == error_code
        assert exc.details == details
        assert exc.exit_code == EXIT_RUNTIME_FAILURE

    def test_configuration_error(self):
        """Test that configuration problems are usage errors."""
        exc = ConfigurationError("Invalid configuration: tau", source="run.toml")
        assert exc.error_code == "CONFIGURATION_ERROR"
        assert exc.exit_code == EXIT_USAGE_ERROR
        assert exc.details == {"source": "run.toml"}
        assert ConfigurationError().details == {}

    def test_messages_name_the_failure(self):
        """Test default messages carry the failing step or channel."""
        assert "step 7" in DivergedSimulationError(step=7).message
        assert "'gamma' at epoch 2" in OptimizerHaltError("gamma", epoch=2).message


class TestHandleException:
    """Tests for handle_exception."""

    def test_application_error(self):
        """Test runtime failures return 1 and are logged as errors."""
        with patch("app.core.exception_handling.error_handler.logger") as mock_logger:
            code = handle_exception(DivergedSimulationError(step=3))
        assert code == EXIT_RUNTIME_FAILURE
        mock_logger.error.assert_called_once()

    def test_usage_error(self):
        """Test configuration errors return 2 and are logged as warnings."""
        with patch("app.core.exception_handling.error_handler.logger") as mock_logger:
            code = handle_exception(ConfigurationError("bad file"))
        assert code == EXIT_USAGE_ERROR
        mock_logger.warning.assert_called_once()
        mock_logger.error.assert_not_called()

    def test_unhandled_exception(self):
        """Test foreign exceptions return 1 with the traceback logged."""
        exc = RuntimeError("unexpected")
        with patch("app.core.exception_handling.error_handler.logger") as mock_logger:
            code = handle_exception(exc)
        assert code == EXIT_RUNTIME_FAILURE
        level, fmt, message, exc_type, text, _ = mock_logger.log.call_args.args
        assert level == logging.ERROR
        assert fmt.startswith("%s: %s: %s")
        assert (message, exc_type, str(text)) == (
            "Unhandled exception",
            "RuntimeError",
            "unexpected",
        )
