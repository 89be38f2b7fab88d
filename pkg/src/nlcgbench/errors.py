"""Exception types shared across the library."""


class DimensionMismatchError(ValueError):
    """Operands have incompatible shapes or lengths."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite or otherwise unusable value."""


class UnsupportedOperationError(TypeError):
    """The requested operation is not defined for this object."""


class ConfigError(ValueError):
    """A run configuration is malformed, incomplete, or inconsistent."""


class DatasetFormatError(ValueError):
    """A dataset file could not be parsed; message carries the offending line."""
