"""
Centralized logging configuration for the CLI and the HTTP service.
Logs to both console and rotating files in the configured log directory.
"""
import logging
import logging.handlers
from pathlib import Path
from typing import Optional

from app.config import get_settings

# Log format
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DETAILED_FORMAT = "%(asctime)s - %(name)s - %(filename)s:%(lineno)d - %(levelname)s - %(message)s"


def _file_handler(path: Path, level: int, max_bytes: int, backups: int) -> logging.Handler:
    handler = logging.handlers.RotatingFileHandler(
        path, maxBytes=max_bytes, backupCount=backups, encoding="utf-8"
    )
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(DETAILED_FORMAT))
    return handler


def setup_logging(service_name: str = "cli", log_dir: Optional[Path] = None) -> None:
    """
    Setup centralized logging for the application.

    Args:
        service_name: Name of the entry point ("cli", "api", or other)
        log_dir: Override for the log directory (defaults to settings)
    """
    log_dir = Path(log_dir or get_settings().log_dir)
    log_dir.mkdir(exist_ok=True, parents=True)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    root_logger.handlers.clear()

    # Console handler (stdout)
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root_logger.addHandler(console_handler)

    root_logger.addHandler(_file_handler(log_dir / "app.log", logging.DEBUG, 10 * 1024 * 1024, 5))
    root_logger.addHandler(_file_handler(log_dir / "errors.log", logging.ERROR, 5 * 1024 * 1024, 3))
    root_logger.addHandler(
        _file_handler(log_dir / f"{service_name}.log", logging.DEBUG, 10 * 1024 * 1024, 5)
    )

    root_logger.info("=" * 80)
    root_logger.info("Logging initialized for service: %s", service_name)
    root_logger.info("Log directory: %s", log_dir)
    root_logger.info("Log files: app.log, errors.log, %s.log", service_name)
    root_logger.info("=" * 80)


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance for a module.

    Args:
        name: Module name (typically __name__)

    Returns:
        Logger instance
    """
    return logging.getLogger(name)
