"""Exception types shared across the package."""


class ConfigError(ValueError):
    """An invalid or inconsistent configuration value."""


class DataError(ValueError):
    """Input data violates a precondition (NaN/Inf, bad shapes, ...)."""


class ShapeError(ValueError):
    """Tensor shapes incompatible for the requested operation."""


class NumericalError(ArithmeticError):
    """A numerical routine failed beyond recoverable safeguards."""


class IngestionError(ValueError):
    """Malformed external input file (CSV rows, timestamps, ...)."""
