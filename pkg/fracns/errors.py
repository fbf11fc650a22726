class FracnsError(Exception):
    pass


class ParameterError(FracnsError, ValueError):
    pass


class DilationRangeError(ParameterError):
    pass


class GridMismatchError(FracnsError, ValueError):
    pass


class UsageError(FracnsError):
    pass


class DegenerateInputError(FracnsError, ValueError):
    pass


class InfeasibleError(FracnsError):
    pass


class ResolutionError(FracnsError):
    pass


class NumericalFailureError(FracnsError, ArithmeticError):
    def __init__(self, message: str, last_iterate=None, iteration: int = 0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iteration = iteration


class ConfigError(FracnsError):
    def __init__(
        self,
        message: str,
        path: str | None = None,
        line: int | None = None,
        column: int | None = None,
    ):
        self.path = path
        self.line = line
        self.column = column
        location = []
        if path:
            location.append(f"field '{path}'")
        if line is not None:
            location.append(f"line {line}, column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
