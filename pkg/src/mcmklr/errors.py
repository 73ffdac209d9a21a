"""Exception hierarchy.

Every error raised on purpose by this package derives from McmklrError,
so callers (notably the CLI) can map failures to exit codes without
catching bare Exception.
"""


class McmklrError(Exception):
    """Base class for all package errors."""


class DimensionError(McmklrError):
    """Vector/matrix shape or length mismatch."""


class ValidationError(McmklrError):
    """Invalid configuration value, label set, or empty input."""


class CapExceededError(ValidationError):
    """A dense-materialization size cap was exceeded."""


class DataFormatError(McmklrError):
    """Malformed dataset text or model file."""


class NumericalError(McmklrError):
    """Training diverged or a linear system could not be solved."""


class UndefinedMetricError(McmklrError):
    """A metric has no defined value on the given inputs."""
