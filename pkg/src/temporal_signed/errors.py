"""Exception hierarchy shared across the package."""


class TemporalSignedError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TemporalSignedError, ValueError):
    pass


class DataError(TemporalSignedError, ValueError):
    """Malformed or unusable input data (parse failures, sign conflicts, density)."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SignConflictError(DataError):
    pass


class SelfLoopError(DataError):
    pass


class DensityError(DataError):
    pass


class SubsetEmptyError(DataError):
    pass


class StratificationError(DataError):
    pass


class ShapeError(TemporalSignedError, ValueError):
    pass


class DomainError(TemporalSignedError, ValueError):
    """A parameter lies outside its mathematical domain."""


class NumericError(TemporalSignedError, ArithmeticError):
    pass


class DivergenceError(NumericError):
    def __init__(self, message, epoch=None):
        self.epoch = epoch
        super().__init__(message)


class StateError(TemporalSignedError, RuntimeError):
    pass


class UndefinedMetricError(TemporalSignedError, ValueError):
    pass
