from pathlib import Path
from typing import Any

from pydantic import BaseModel

from .config import settings

LOGGER_NAME = "hidden_population"


class LogConfig(BaseModel):
    version: int = 1
    disable_existing_loggers: bool = False
    formatters: dict[str, dict[str, str]] = {}
    handlers: dict[str, dict[str, Any]] = {}
    loggers: dict[str, dict[str, Any]] = {}

    @classmethod
    def for_run(
        cls, level: str | None = None, log_file: Path | None = None
    ) -> "LogConfig":
        """Console logging on stderr, plus a file copy of the run when asked."""
        handlers: dict[str, dict[str, Any]] = {
            "console": {
                "formatter": "plain",
                "class": "logging.StreamHandler",
                "stream": "ext://sys.stderr",
            }
        }
        if log_file is not None:
            handlers["run_file"] = {
                "formatter": "plain",
                "class": "logging.FileHandler",
                "filename": str(log_file),
                "mode": "a",
                "encoding": "utf-8",
            }

        return cls(
            formatters={
                "plain": {
                    "format": settings.log_format,
                    "datefmt": settings.log_date_format,
                }
            },
            handlers=handlers,
            loggers={
                LOGGER_NAME: {
                    "handlers": list(handlers),
                    "level": level or settings.log_level,
                }
            },
        )
