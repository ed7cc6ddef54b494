"""Exception hierarchy. The CLI maps each family to an exit code."""


class StructDictError(Exception):
    """Base class for all library errors."""


class ConfigError(StructDictError, ValueError):
    """Invalid parameters or experiment configuration (exit code 2)."""


class ConformanceError(ConfigError):
    """Matrix dimensions do not line up."""


class DataError(StructDictError, ValueError):
    """Malformed or inconsistent input data (exit code 3)."""


class NumericalError(StructDictError, ArithmeticError):
    """Singular systems, non-finite iterates and similar failures (exit code 4)."""
