"""Hybrid quantum-classical GAN: variational-circuit generator, classical discriminator."""

from ._accel import backend_name, jit_enabled, set_jit
from .errors import (
    ConfigurationError,
    DomainError,
    NumericalError,
    ParseError,
    QcganError,
    StructuralError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DomainError",
    "NumericalError",
    "ParseError",
    "QcganError",
    "StructuralError",
    "backend_name",
    "jit_enabled",
    "set_jit",
]
