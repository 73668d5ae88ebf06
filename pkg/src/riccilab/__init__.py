"""Symbolic workbench for conservation-law and symmetry analysis of
evolution equations in three independent variables, with the 2D Ricci flow
as the built-in case study."""

from .expr import (
    Const,
    Expr,
    FunApp,
    FunctionSymbol,
    IPow,
    Jet,
    Prod,
    Rat,
    RPow,
    Sum,
    SymbolTable,
    Var,
    diff_partial,
    is_zero,
    normalize,
    substitute,
)
from .jets import VectorField, euler_operator, prolong, ricci_delta, total_derivative
from .parsing import ParseError, SourceSpan, parse, print_canonical

__version__ = "0.1.0"

__all__ = [
    "Const", "Expr", "FunApp", "FunctionSymbol", "IPow", "Jet", "ParseError",
    "Prod", "Rat", "RPow", "SourceSpan", "Sum", "SymbolTable", "Var",
    "VectorField", "diff_partial", "euler_operator", "is_zero", "normalize",
    "parse", "print_canonical", "prolong", "ricci_delta", "substitute",
    "total_derivative", "__version__",
]
