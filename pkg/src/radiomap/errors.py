"""Error taxonomy shared by the library and the command line tool.

Each class maps to one process exit code so shell callers can branch on
failure category without parsing messages.
"""


class RadioMapError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(RadioMapError, ValueError):
    """Bad caller input: shape mismatch, non-finite data, out-of-range value."""

    exit_code = 2


class FormatError(RadioMapError):
    """Malformed file: wrong magic, truncated payload, failed checksum."""

    exit_code = 3


class NumericalFailureError(RadioMapError):
    """A numerical routine failed to produce a usable result."""

    exit_code = 4


class ConfigError(RadioMapError):
    """Unparseable or unknown configuration entry."""

    exit_code = 5
