class AugPdgError(Exception):
    """Base class for every error raised by the solver library."""


class InputError(AugPdgError, ValueError):
    """Bad arguments: dimension mismatch, negative initial multipliers, malformed files."""


class ProblemFileError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


class NumericError(AugPdgError, ArithmeticError):
    """Non-finite oracle output or overflow during an iteration."""

    def __init__(self, message, iteration=None, trace=None):
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace


class DivergenceError(NumericError):
    pass


class CertificateError(AugPdgError):
    """A rate certificate cannot be built; `constant` names the failing quantity."""

    def __init__(self, message, constant=None):
        super().__init__(message)
        self.constant = constant
