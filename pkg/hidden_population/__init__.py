from logging.config import dictConfig
from pathlib import Path

from .config import settings
from .logging import LogConfig

__version__ = "0.1.0"


def configure_logging(level: str | None = None, log_file: Path | None = None) -> None:
    dictConfig(LogConfig.for_run(level, log_file or settings.log_file).dict())
