"""
Logging module for the dynamics learner.

This module provides a centralised logging configuration for the library and
CLI. Loggers write to the console and, when enabled in the settings, to files
rolling over at midnight with a separate error log. Setting the log format to
``json`` switches every handler to structured JSON lines.
"""

import sys
import logging
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path

from pythonjsonlogger.json import JsonFormatter

from app.core.configuration.config import settings

ROOT_LOGGER_NAME = "dynamics_learner"


class LoggerFactory:
    """
    Factory for creating and configuring loggers.

    This class handles the creation and configuration of loggers for the
    application, setting up handlers and formatters based on the process
    settings so that every module logs the same way.
    """

    DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    JSON_FIELDS = "%(asctime)s %(name)s %(levelname)s %(message)s"
    DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

    @staticmethod
    def _ensure_log_directory() -> Path:
        """Ensure the logs directory exists."""
        log_dir = Path(settings.log_dir if settings else "logs")
        log_dir.mkdir(parents=True, exist_ok=True)
        return log_dir

    @classmethod
    def _create_formatter(cls) -> logging.Formatter:
        """Create the formatter selected by the log format setting."""
        if settings is not None and settings.log_format == "json":
            return JsonFormatter(cls.JSON_FIELDS, datefmt=cls.DATE_FORMAT)
        return logging.Formatter(cls.DEFAULT_FORMAT, cls.DATE_FORMAT)

    @classmethod
    def _create_console_handler(cls) -> logging.Handler:
        """Create and configure a console handler."""
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(cls._create_formatter())
        return console_handler

    @classmethod
    def _create_file_handler(cls, filename: str, level: int = logging.INFO) -> logging.Handler:
        """
        Create and configure a file handler with midnight rotation.

        Args:
            filename: Name of the log file
            level: Logging level to use

        Returns:
            TimedRotatingFileHandler: Configured file handler
        """
        log_dir = cls._ensure_log_directory()
        file_path = log_dir / filename

        file_handler = TimedRotatingFileHandler(
            filename=file_path,
            when="midnight",
            backupCount=30,
            encoding="utf-8",
        )
        file_handler.setFormatter(cls._create_formatter())
        file_handler.setLevel(level)
        return file_handler

    @classmethod
    def create_logger(cls, name: str) -> logging.Logger:
        """
        Create and configure a logger with the given name.

        Args:
            name: Name of the logger (typically the module name)

        Returns:
            Logger: Configured logger instance
        """
        logger = logging.getLogger(name)

        # Clear any existing handlers (to prevent duplicates)
        if logger.hasHandlers():
            logger.handlers.clear()

        level_name = settings.log_level if settings else "INFO"
        logger.setLevel(getattr(logging, level_name, logging.INFO))

        logger.addHandler(cls._create_console_handler())

        if settings is not None and settings.log_to_file:
            logger.addHandler(cls._create_file_handler("app.log"))
            logger.addHandler(cls._create_file_handler("error.log", logging.ERROR))

        logger.propagate = False

        return logger


def get_logger(module_name: str) -> logging.Logger:
    """
    Get a logger configured for the given module name.

    Args:
        module_name: Name of the module (typically __name__)

    Returns:
        Logger: Configured logger instance named under the application root
    """
    return LoggerFactory.create_logger(f"{ROOT_LOGGER_NAME}.{module_name}")
