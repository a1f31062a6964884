"""Exception types shared across the package.

The CLI maps these onto distinct exit codes; library code raises them
directly so callers can tell a bad configuration from bad input data or a
numerical failure.
"""


class ConfigError(ValueError):
    """A configuration file or option set is invalid."""


class InputError(ValueError):
    """A referenced input is missing or unusable."""


class AnnotationParseError(InputError):
    """An annotation or feature file is malformed (message carries the line)."""


class NumericError(RuntimeError):
    """A computation produced non-finite values."""


class EmptyResultError(RuntimeError):
    """An operation produced no result rows (empty selection everywhere)."""
