"""Exception types shared across the package.

The split mirrors the CLI exit codes: configuration problems (2), malformed
or inconsistent input data (3), and numerical failures (4).
"""


class FieldfitError(Exception):
    """Base class for package-specific errors."""


class ConfigError(FieldfitError):
    """Invalid run configuration."""


class DataError(FieldfitError):
    """Malformed or inconsistent input data."""


class NumericalError(FieldfitError):
    """A numerical procedure failed to produce a usable result."""
