"""Exception hierarchy shared by every module of the package."""


class TriceptError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(TriceptError, ValueError):
    pass


class ShapeError(TriceptError, ValueError):
    pass


class NumericalError(TriceptError, ArithmeticError):
    pass


class SingularConfigurationError(TriceptError):
    """A leg length collapsed to zero or the FK Jacobian became singular."""


class ConvergenceError(TriceptError):
    """Newton iteration ran out of iterations.

    ``residual`` holds the last residual vector.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AlgebraMismatchError(TriceptError):
    """A printed closed-form expansion produced a negative squared length."""

    def __init__(self, message, leg):
        super().__init__(message)
        self.leg = leg


class GenerationError(TriceptError):
    pass


class NormalizationError(TriceptError, ValueError):
    pass


class SplitError(TriceptError, ValueError):
    pass


class ParseError(TriceptError, ValueError):
    """Malformed file content; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingStalledError(TriceptError):
    pass


class NotTrainedError(TriceptError):
    pass


class ConfigError(TriceptError, ValueError):
    """Invalid run configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
