"""Closed-form expressions over chart coordinates.

Grammar: numbers, coordinate names, + - * / ** (or ^), parentheses, exp, sin, cos,
sqrt and the constant pi. Anything else is rejected.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
import sympy
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

from equitrace.exceptions import ParseError

log = logging.getLogger(__name__)

ALLOWED_FUNCTIONS = {
    "exp": sympy.exp,
    "sin": sympy.sin,
    "cos": sympy.cos,
    "sqrt": sympy.sqrt,
}
ALLOWED_CONSTANTS = {"pi": sympy.pi}
PARSER_GLOBALS = {
    "Symbol": sympy.Symbol,
    "Integer": sympy.Integer,
    "Float": sympy.Float,
    "Rational": sympy.Rational,
    "__builtins__": {},
}
TRANSFORMATIONS = standard_transformations + (convert_xor,)


def parse_expression(text: str, symbols: Dict[str, sympy.Symbol]) -> sympy.Expr:
    if not isinstance(text, (str, int, float)):
        raise ParseError(
            f"Expression must be a string or number, got {type(text).__name__}"
        )
    local = {**symbols, **ALLOWED_FUNCTIONS, **ALLOWED_CONSTANTS}
    try:
        expr = parse_expr(
            str(text),
            local_dict=local,
            global_dict=dict(PARSER_GLOBALS),
            transformations=TRANSFORMATIONS,
        )
    except (SyntaxError, TypeError, NameError, AttributeError, sympy.SympifyError) as exc:
        raise ParseError(f"Cannot parse expression {text!r}: {exc}")
    if not isinstance(expr, sympy.Expr):
        raise ParseError(f"Expression {text!r} is not a scalar expression")

    unknown = {s.name for s in expr.free_symbols} - set(symbols)
    if unknown:
        raise ParseError(f"Unknown names {sorted(unknown)} in expression {text!r}")
    allowed = (sympy.exp, sympy.sin, sympy.cos)
    for fn in expr.atoms(sympy.Function):
        if not isinstance(fn, allowed):
            raise ParseError(f"Function {fn.func} is not allowed in {text!r}")
    return expr


class CompiledMatrix:
    """A rows x cols matrix of expressions, evaluated on points of shape (..., n).

    Vectors are stored as (rows, 1) and returned with the trailing axis dropped.
    """

    def __init__(
        self,
        entries: sympy.Matrix,
        symbols: Sequence[sympy.Symbol],
        vector: bool = False,
        n_coords: Optional[int] = None,
    ):
        self.entries = entries
        self.symbols = list(symbols)
        self.n_coords = len(self.symbols) if n_coords is None else n_coords
        self.vector = vector
        self.shape = entries.shape
        self._funcs = [
            sympy.lambdify(self.symbols, entries[i, j], "numpy")
            for i in range(self.shape[0])
            for j in range(self.shape[1])
        ]
        self.constant = all(len(e.free_symbols) == 0 for e in entries)

    @classmethod
    def from_strings(
        cls,
        rows: Sequence,
        coordinates: Sequence[str],
        extra: Optional[Sequence[str]] = None,
        vector: bool = False,
    ) -> "CompiledMatrix":
        names = list(coordinates) + list(extra or [])
        symbols = {name: sympy.Symbol(name, real=True) for name in names}
        if vector:
            parsed = [[parse_expression(item, symbols)] for item in rows]
        else:
            parsed = [[parse_expression(item, symbols) for item in row] for row in rows]
        return cls(
            sympy.Matrix(parsed),
            [symbols[n] for n in names],
            vector=vector,
            n_coords=len(coordinates),
        )

    def jacobian(self) -> "CompiledMatrix":
        """Symbolic derivative of a vector expression with respect to the coordinates."""
        if not self.vector:
            raise ValueError("Only vector expressions have a Jacobian")
        coords = self.symbols[: self.n_coords]
        return CompiledMatrix(
            self.entries.jacobian(coords), self.symbols, n_coords=self.n_coords
        )

    def __call__(self, m: np.ndarray, *extra: float) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        batch = m.shape[:-1]
        args = [m[..., k] for k in range(m.shape[-1])] + list(extra)
        values = [
            np.broadcast_to(np.asarray(f(*args), dtype=float), batch) for f in self._funcs
        ]
        out = np.stack(values, axis=-1).reshape(batch + self.shape)
        return out[..., 0] if self.vector else out

    def __repr__(self):
        return f"CompiledMatrix({self.entries.tolist()})"


def identity_strings(rank: int) -> List[List[str]]:
    return [["1" if i == j else "0" for j in range(rank)] for i in range(rank)]


def zero_strings(rank: int) -> List[List[str]]:
    return [["0"] * rank for _ in range(rank)]
