"""Exception hierarchy shared by every vpropkit module."""


class VpropError(Exception):
    """Base class for all errors raised by vpropkit."""


class InvalidDimensionError(VpropError, ValueError):
    pass


class NotPositiveDefiniteError(VpropError, ValueError):
    """Raised when a Cholesky factorization meets a non-positive pivot.

    ``index`` is the 0-based pivot position; ``step`` is filled in by the
    optimizers when the failure happened inside a trajectory.
    """

    def __init__(self, message, index=None, step=None):
        super().__init__(message)
        self.index = index
        self.step = step


class NonPositivePrecisionError(VpropError, ValueError):
    pass


class SingularMatrixError(VpropError, ValueError):
    pass


class CapabilityError(VpropError, TypeError):
    """The objective does not provide the requested derivative or expectation."""


class ConvergenceError(VpropError, RuntimeError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ParseError(VpropError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(VpropError, ValueError):
    def __init__(self, message, key=None):
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
        self.key = key
