"""Exception hierarchy shared by the package.

The command line maps these onto exit codes, so every failure raised by the
library should derive from one of the three roots below (or from the plain
``ValueError`` used for argument validation).
"""
from __future__ import annotations


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class DataFormatError(ValueError):
    """A dataset or manifest file does not match the expected format."""


class NumericalError(ArithmeticError):
    """A computation failed or produced an unphysical result."""
