"""Numerical detection of bifurcation values of polynomial maps R^n -> R^(n-1)."""
from .polymap import (
    Polynomial,
    PolynomialError,
    PolynomialMap,
    evaluate,
    jacobian,
    milnor_polynomial,
    parse_map,
)

__version__ = "0.1.0"
