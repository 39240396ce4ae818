from pathlib import Path


class HiddenPopulationError(Exception):
    pass


class InvalidArgumentError(HiddenPopulationError, ValueError):
    pass


class NumericalError(HiddenPopulationError, ArithmeticError):
    def __init__(
        self, message: str, condition: float | None = None, iteration: int | None = None
    ) -> None:
        self.detail = message
        self.condition = condition
        self.iteration = iteration

        if condition is not None:
            message = f"{message} (condition number {condition:.3e})"
        if iteration is not None:
            message = f"{message} at iteration {iteration}"

        super().__init__(message)


class FormatError(HiddenPopulationError, ValueError):
    def __init__(self, message: str, path: Path | str, line: int | None = None) -> None:
        self.path = Path(path)
        self.line = line

        location = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{location}: {message}")


class DataValidationError(HiddenPopulationError, ValueError):
    pass


class UndefinedCorrelationError(DataValidationError):
    pass


class UsageError(HiddenPopulationError):
    pass
