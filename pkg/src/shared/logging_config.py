import logging
import sys
from pathlib import Path
from typing import Optional

from .config.settings import Settings, get_settings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(settings: Optional[Settings] = None, level: Optional[str] = None) -> None:
    """Configure console and file logging once per process.

    Console output goes to stderr: stdout carries the JSON documents of `estimate`.
    """
    settings = settings or get_settings()
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.LOG_TO_FILE:
        Path(settings.LOGS_DIR_NAME).mkdir(parents=True, exist_ok=True)
        handlers.append(
            logging.FileHandler(f"{settings.LOGS_DIR_NAME}/{settings.LOG_FILENAME}", mode="a")
        )

    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper()),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
