"""
Logging utilities for the dynamics learner.

Run-scoped context adapters, a call-tracing decorator and a timing context
manager used around long-running operations such as data generation,
training runs and sweeps.
"""

import time
import logging
import functools
import traceback
from typing import Any, Callable, Dict, Mapping, Optional, TypeVar, cast

from app.core.logging.logger import get_logger

T = TypeVar("T")

MAX_REPR = 120
MAX_LISTED = 8


def format_context(context: Mapping[str, Any]) -> str:
    """Render context as ``[key=value]`` pairs, in insertion order."""
    return " ".join(f"[{k}={v}]" for k, v in context.items())


class LoggingContextAdapter(logging.LoggerAdapter):
    """Logger adapter appending run context, e.g. ``[seed=7] [protocol=marginals]``."""

    def process(self, msg, kwargs):
        """Append the adapter's context to the message."""
        context = format_context(self.extra or {})
        if context:
            return f"{msg} {context}", kwargs
        return msg, kwargs


def get_context_logger(module_name: str, **context) -> logging.LoggerAdapter:
    """
    Module logger that tags every line with the given context.

    Args:
        module_name: Module name, typically ``__name__``
        **context: Key-value pairs appended to each message

    Returns:
        LoggerAdapter: The tagged logger
    """
    return LoggingContextAdapter(get_logger(module_name), context)


def _short_repr(value: Any) -> str:
    """Bounded representation: arrays by shape, long sequences by length."""
    shape = getattr(value, "shape", None)
    if shape is not None:
        return f"<{type(value).__name__} shape={tuple(shape)}>"
    if isinstance(value, (list, tuple)) and len(value) > MAX_LISTED:
        return f"<{type(value).__name__} len={len(value)}>"
    text = repr(value)
    return text if len(text) <= MAX_REPR else text[: MAX_REPR - 3] + "..."


def log_function_call(level: int = logging.DEBUG):
    """
    Decorator logging a call, its result and any exception it raises.

    Arguments and results are summarised by ``_short_repr`` so trajectory
    batches do not flood the log.

    Args:
        level: Level of the call and return lines; exceptions use ERROR
    """

    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            logger = get_logger(func.__module__)
            parts = [_short_repr(a) for a in args]
            parts += [f"{k}={_short_repr(v)}" for k, v in kwargs.items()]
            logger.log(level, "Calling %s(%s)", func.__name__, ", ".join(parts))
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                logger.error(
                    "%s raised %s: %s", func.__name__, type(e).__name__, e, exc_info=True
                )
                raise
            logger.log(level, "%s returned %s", func.__name__, _short_repr(result))
            return result

        return cast(Callable[..., T], wrapper)

    return decorator


def log_exception(
    logger: logging.Logger, message: str, exc: BaseException, level: int = logging.ERROR
) -> None:
    """
    Log ``message: ExcType: text`` followed by the active traceback.

    Call from inside the ``except`` block so the traceback is available.
    """
    logger.log(
        level,
        "%s: %s: %s\n%s",
        message,
        type(exc).__name__,
        exc,
        traceback.format_exc(),
    )


class OperationLogger:
    """
    Context manager timing an operation.

    Logs a start line, then either a completion line with the wall-clock
    duration or a failure line with the exception. Exceptions propagate.

    ``log_options`` keys: ``log_level`` (default INFO), ``error_level``
    (default ERROR) and ``context``, a mapping appended to every line.
    """

    DEFAULT_LOG_LEVEL = logging.INFO
    DEFAULT_ERROR_LEVEL = logging.ERROR

    def __init__(
        self,
        logger: logging.Logger,
        operation_name: str,
        log_options: Optional[Dict[str, Any]] = None,
    ):
        options = log_options or {}
        self.logger = logger
        self.operation_name = operation_name
        self.log_level = options.get("log_level", self.DEFAULT_LOG_LEVEL)
        self.error_level = options.get("error_level", self.DEFAULT_ERROR_LEVEL)
        self.context: Mapping[str, Any] = options.get("context", {})
        self.start_time: Optional[float] = None
        self.duration: Optional[float] = None

    def _suffix(self) -> str:
        context = format_context(self.context)
        return f" {context}" if context else ""

    def __enter__(self) -> "OperationLogger":
        self.start_time = time.perf_counter()
        self.logger.log(
            self.log_level, "Starting operation: %s%s", self.operation_name, self._suffix()
        )
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        self.duration = time.perf_counter() - (self.start_time or 0.0)
        if exc_type is None:
            self.logger.log(
                self.log_level,
                "Completed operation: %s in %.4fs%s",
                self.operation_name,
                self.duration,
                self._suffix(),
            )
        else:
            self.logger.log(
                self.error_level,
                "Failed operation: %s after %.4fs: %s: %s%s",
                self.operation_name,
                self.duration,
                exc_type.__name__,
                exc_val,
                self._suffix(),
                exc_info=True,
            )
        return False
