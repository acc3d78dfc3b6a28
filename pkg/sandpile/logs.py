import importlib
import os
import sys
from pathlib import Path

from loguru import logger

DEFAULT_SETTINGS = "sandpile.config.DevelopmentConfig"


def load_settings(name: str | None = None) -> type:
    """Settings class named by SANDPILE_SETTINGS, e.g. "sandpile.config.ProductionConfig"."""
    name = name or os.getenv("SANDPILE_SETTINGS", DEFAULT_SETTINGS)
    module_name, _, class_name = name.rpartition(".")
    try:
        return getattr(importlib.import_module(module_name), class_name)
    except (ImportError, AttributeError, ValueError) as e:
        raise RuntimeError(f"Cannot load settings {name!r}: {e}") from e


def init_logging(settings) -> None:
    logger.remove()
    if settings.DEBUG:
        logger.add(sys.stderr, level="DEBUG")
        return
    if settings.TESTING:
        logger.add(sys.stderr, level="WARNING")
        return

    if settings.LOG_TO_STDOUT:
        logger.add(sys.stderr, level=settings.LOG_LEVEL)
    else:
        logs_path = Path("logs")
        if not logs_path.exists():
            logs_path.mkdir()
        logger.add(
            "logs/sandpile.log",
            level=settings.LOG_LEVEL,
            rotation="10 KB",
            retention=10,
            format="{time} {level}: {message} [in {file.path}:{line}]",
        )
