"""Geometric toolkit for first-order field theories with a k-symplectic phase space.

Builds the canonical structures of the k-velocity bundle and its dual from
symbolic Lagrangians/Hamiltonians, solves the field equations at desk scale,
and verifies symmetry conditions, conservation laws and gauge equivalence.
"""

from .coords import VarTable
from .expr import Expr, DomainError, ParseError, UndeclaredNameError, parse, to_source

__all__ = [
    "VarTable",
    "Expr",
    "DomainError",
    "ParseError",
    "UndeclaredNameError",
    "parse",
    "to_source",
]

__version__ = "0.1.0"
