"""Exception types shared across the package."""


class DS4DError(Exception):
    """Base class for all package errors."""


class ShapeError(DS4DError, ValueError):
    """Operands have incompatible shapes or dimensions."""


class DomainError(DS4DError, ValueError):
    """Input is outside the mathematical domain of an operation."""


class ConfigError(DS4DError, ValueError):
    """Invalid or unknown configuration value."""


class DataError(DS4DError, ValueError):
    """Dataset is incomplete or inconsistent."""


class OptimizerError(DS4DError, RuntimeError):
    """Optimizer received a non-finite gradient or diverged."""


class CheckError(DS4DError, RuntimeError):
    """A verification routine could not be evaluated."""


class IOFormatError(DS4DError, ValueError):
    """A file does not match its documented format."""
