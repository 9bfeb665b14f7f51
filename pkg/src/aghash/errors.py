"""Error types shared across the package."""


class AghashError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(AghashError):
    """A file is structurally malformed (bad header, truncated, unparseable)."""


class DataError(AghashError):
    """File contents violate a value contract (non-finite entry, non-binary label)."""


class ShapeError(AghashError):
    """Matrix dimensions do not conform."""


class ParameterError(AghashError):
    """An argument is outside its valid range."""


class NumericError(AghashError):
    """Training produced a non-finite quantity."""


class ConfigError(AghashError):
    """Inconsistent configuration (e.g. code-length mismatch with a checkpoint)."""
