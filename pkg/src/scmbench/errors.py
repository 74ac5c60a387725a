"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, data problems with 3 and numeric failures with 4.
"""

from __future__ import annotations

__all__ = [
    "ScmBenchError",
    "ConfigError",
    "DataError",
    "NumericError",
]


class ScmBenchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ScmBenchError):
    """Invalid configuration: bad YAML, unknown variables, cyclic graphs,
    malformed sampler parameters, invalid CLI arguments."""


class DataError(ScmBenchError):
    """Invalid input data: missing files, malformed rows, unknown
    categories, empty tables."""


class NumericError(ScmBenchError):
    """Numeric failure during fitting or estimation: non-finite losses,
    degenerate weights, optimizers that cannot make progress."""
