import traceback
from logging import getLogger

from pydantic import ValidationError

from ..exceptions import HiddenPopulationError, UsageError
from .constants import ExitCode

logger = getLogger("hidden_population")


def exit_code_for(error: BaseException) -> ExitCode:
    if isinstance(error, (UsageError, ValidationError, FileNotFoundError)):
        return ExitCode.USAGE

    return ExitCode.FAILURE


def error_handler(error: BaseException) -> ExitCode:
    tb_string = "".join(
        traceback.format_exception(type(error), error, error.__traceback__)
    )
    logger.debug(f"Exception while running a command:\n{tb_string}")

    if isinstance(error, (HiddenPopulationError, ValidationError, OSError)):
        logger.error(f"{type(error).__name__}: {error}")
    else:
        logger.error("Unexpected exception while running a command", exc_info=error)

    return exit_code_for(error)
