"""Pseudospectral laboratory for the nonlocal perturbed Benjamin-Ono equation

    u_t + u u_x + H u_xx + mu (H u_x + H u_xxx) = 0

on a large periodic box standing in for the real line.
"""
from .errors import (ConfigurationError, DomainError, HorizonTooLargeError,
                     InstabilityError, InvalidRunError, NpboError, NumericError)
from .semigroup import SymbolParams, semigroup_apply, symbol
from .spectral import Field, TorusGrid, forward_transform, sobolev_norm

__all__ = [
    "ConfigurationError", "DomainError", "HorizonTooLargeError", "InstabilityError",
    "InvalidRunError", "NpboError", "NumericError", "SymbolParams", "semigroup_apply",
    "symbol", "Field", "TorusGrid", "forward_transform", "sobolev_norm",
]

__version__ = "0.1.0"
