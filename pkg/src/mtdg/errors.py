"""Exception hierarchy shared by every module."""


class MtdgError(Exception):
    """Base class; ``str(type(e).__name__)`` is the machine-readable error class."""


class DomainError(MtdgError, ValueError):
    pass


class ResourceError(MtdgError):
    pass


class NumericError(MtdgError, ArithmeticError):
    pass


class OptimizationError(MtdgError):
    pass


class IdentifiabilityError(MtdgError, ValueError):
    pass


class ParseError(MtdgError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OrderingError(MtdgError, ValueError):
    pass


class ModelLoadError(MtdgError):
    pass
