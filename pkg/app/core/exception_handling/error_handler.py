"""
Exception handling module for the dynamics learner.

This module provides centralised exception handling for the library and its
command-line interface. It defines the application exception hierarchy raised
by the numerical services and the mapping from exceptions to process exit
codes used by the CLI.
"""

from typing import Any, Dict, Optional

from app.core.logging.logger import get_logger
from app.core.logging.utils import log_exception

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_RUNTIME_FAILURE = 1
EXIT_USAGE_ERROR = 2


class BaseAppException(Exception):
    """
    Base exception class for application-specific exceptions.

    This serves as the parent class for all custom exceptions in the application,
    providing consistent structure and behaviour.

    Attributes:
        error_code: Machine-readable error code
        message: Human-readable error message
        exit_code: Process exit code the CLI returns for this error
        details: Additional error details
    """

    def __init__(
        self,
        error_code: str,
        message: str,
        exit_code: int = EXIT_RUNTIME_FAILURE,
        details: Optional[Dict[str, Any]] = None,
    ):
        """
        Initialize the exception with error information.

        Args:
            error_code: Machine-readable error code
            message: Human-readable error message
            exit_code: Process exit code for the CLI
            details: Additional error details
        """
        self.error_code = error_code
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


class InvalidArgumentError(BaseAppException):
    """Exception raised when an argument has the wrong shape, range or value."""

    def __init__(self, message: str = "Invalid argument", **details: Any):
        super().__init__(
            error_code="INVALID_ARGUMENT",
            message=message,
            details=details,
        )


class ConfigurationError(BaseAppException):
    """Exception raised when a run configuration cannot be loaded or validated."""

    def __init__(self, message: str = "Invalid configuration", source: Optional[str] = None):
        """
        Initialize the exception with the offending configuration source.

        Args:
            message: Human-readable error message
            source: Path of the configuration file, if any
        """
        details = {"source": source} if source else {}
        super().__init__(
            error_code="CONFIGURATION_ERROR",
            message=message,
            exit_code=EXIT_USAGE_ERROR,
            details=details,
        )


class StabilityWarningError(BaseAppException):
    """Exception raised when the integrator is asked to run outside its stable regime."""

    def __init__(self, message: str, ratio: float):
        super().__init__(
            error_code="STABILITY_WARNING",
            message=message,
            details={"ratio": ratio},
        )


class DivergedSimulationError(BaseAppException):
    """Exception raised when a simulated trajectory produces non-finite values."""

    def __init__(self, step: int, message: Optional[str] = None):
        """
        Initialize the exception with the failing step.

        Args:
            step: Index of the step whose force or state was non-finite
            message: Optional override of the default message
        """
        super().__init__(
            error_code="DIVERGED_SIMULATION",
            message=message or f"Simulation diverged at step {step}",
            details={"step": step},
        )


class DegenerateRadiusError(BaseAppException):
    """Exception raised when a radial force is evaluated too close to the origin."""

    def __init__(self, radius: float):
        super().__init__(
            error_code="DEGENERATE_RADIUS",
            message=f"Radial force undefined at radius {radius:.3e}",
            details={"radius": radius},
        )


class AdjointBlowupError(BaseAppException):
    """Exception raised when the backward recurrence produces non-finite values."""

    def __init__(self, step: int, sample_id: int):
        super().__init__(
            error_code="ADJOINT_BLOWUP",
            message=f"Adjoint recurrence became non-finite at step {step}",
            details={"step": step, "sample_id": sample_id},
        )


class InvalidBatchError(BaseAppException):
    """Exception raised when a sample batch cannot be used by an estimator."""

    def __init__(self, message: str = "Invalid batch", **details: Any):
        super().__init__(
            error_code="INVALID_BATCH",
            message=message,
            details=details,
        )


class ProvenanceMismatchError(BaseAppException):
    """Exception raised when generated fragments do not match their trajectories."""

    def __init__(self, message: str = "Fragments do not match their trajectories", **details: Any):
        super().__init__(
            error_code="PROVENANCE_MISMATCH",
            message=message,
            details=details,
        )


class FragmentBoundsError(BaseAppException):
    """Exception raised when a fragment reaches outside its trajectory."""

    def __init__(self, message: str, **details: Any):
        super().__init__(
            error_code="FRAGMENT_BOUNDS",
            message=message,
            details=details,
        )


class MissingSeedError(BaseAppException):
    """Exception raised when protocol output carries no usable seed slices."""

    def __init__(self, message: str = "Protocol output has no seed slices"):
        super().__init__(error_code="MISSING_SEED", message=message)


class OptimizerHaltError(BaseAppException):
    """Exception raised when the optimizer receives a non-finite gradient."""

    def __init__(self, channel: str, epoch: Optional[int] = None):
        """
        Initialize the exception with the offending parameter channel.

        Args:
            channel: Name of the learnable channel with a non-finite gradient
            epoch: Training epoch, when known
        """
        details: Dict[str, Any] = {"channel": channel}
        if epoch is not None:
            details["epoch"] = epoch
        where = f" at epoch {epoch}" if epoch is not None else ""
        super().__init__(
            error_code="OPTIMIZER_HALT",
            message=f"Non-finite gradient in channel '{channel}'{where}",
            details=details,
        )


def handle_exception(exc: BaseException) -> int:
    """
    Log an exception and translate it into a process exit code.

    Application exceptions with a usage exit code are logged as warnings,
    other application exceptions as errors. Anything else is an unhandled
    exception and is logged with its traceback.

    Args:
        exc: The exception that reached the command-line boundary

    Returns:
        int: Exit code for the process
    """
    if isinstance(exc, BaseAppException):
        if exc.exit_code == EXIT_USAGE_ERROR:
            logger.warning("Application exception: %s - %s", exc.error_code, exc.message)
        else:
            logger.error(
                "Application exception: %s - %s %s",
                exc.error_code,
                exc.message,
                exc.details,
            )
        return exc.exit_code

    log_exception(logger, "Unhandled exception", exc)
    return EXIT_RUNTIME_FAILURE
