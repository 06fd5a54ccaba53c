import logging
import logging.config
from pathlib import Path
from typing import Optional

from glfem.core.config import settings


def configure_logging(level: Optional[str] = None, config_path: Optional[str] = None) -> None:
    """Configure logging from the ini file, then apply the level override.

    Mirrors the ``[loggers]``/``[handlers]``/``[formatters]`` layout of a
    classic ``fileConfig`` setup; falls back to ``basicConfig`` when the file
    cannot be found.
    """
    path = Path(config_path or settings.LOGGING_CONFIG or "")
    if path.is_file():
        logging.config.fileConfig(path, disable_existing_loggers=False)
    else:
        logging.basicConfig(format="%(levelname)-5.5s [%(name)s] %(message)s")

    logging.getLogger("glfem").setLevel((level or settings.LOG_LEVEL).upper())
