"""Exception types shared across the package.

Each class maps to one CLI exit code (see ``qcgan.cli``).
"""


class QcganError(Exception):
    exit_code = 1


class ConfigurationError(QcganError, ValueError):
    """Bad hyperparameter, bad config file, or an unusable run setup."""

    exit_code = 1


class StructuralError(QcganError, ValueError):
    """Shape, index, or parameter-count mismatch."""

    exit_code = 1


class DomainError(QcganError, ValueError):
    """Input outside the mathematical domain of an operation."""

    exit_code = 1


class ParseError(QcganError, ValueError):
    """Malformed data file (IDX payload or checkpoint)."""

    exit_code = 2


class NumericalError(QcganError, FloatingPointError):
    exit_code = 3
