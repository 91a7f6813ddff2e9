"""Scalar expressions over base coordinates x1..xm (and optionally t).

All smooth data in the engine (vector field components, derivation matrix
entries, section components, structure functions) is given as parsed
expressions. Evaluation is plain floating point; `eval_jet` propagates
first-order forward-mode derivatives through the AST.

Grammar, tightest first: `^` (constant exponent, right-assoc), unary `-`,
`* /`, binary `+ -`; unary functions by name: sin cos exp log sqrt tanh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ArityError, EvalDomainError, ParseError, UnknownIdentifierError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based; prints as x{index+1}


@dataclass(frozen=True)
class TimeVar:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: float


Node = Union[Const, Var, TimeVar, Neg, Call, Bin, Pow]


def node_to_text(n: Node) -> str:
    """Render with enough parentheses to round-trip structurally."""
    if isinstance(n, Const):
        return repr(n.value)
    if isinstance(n, Var):
        return f"x{n.index + 1}"
    if isinstance(n, TimeVar):
        return "t"
    if isinstance(n, Neg):
        return f"(-{node_to_text(n.arg)})"
    if isinstance(n, Call):
        return f"{n.name}({node_to_text(n.arg)})"
    if isinstance(n, Bin):
        return f"({node_to_text(n.left)} {n.op} {node_to_text(n.right)})"
    if isinstance(n, Pow):
        return f"({node_to_text(n.base)} ^ {repr(n.exponent)})"
    raise TypeError(f"not an AST node: {n!r}")


# ---------------------------------------------------------------------------
# Tokenizer

_OPS = "+-*/^(),"


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    """Returns (kind, text, offset) triples; kinds: num, ident, op, end."""
    toks = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            toks.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            try:
                float(lit)
            except ValueError:
                raise ParseError(f"malformed number '{lit}'", i) from None
            toks.append(("num", lit, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("ident", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character '{c}'", i)
    toks.append(("end", "", n))
    return toks


# ---------------------------------------------------------------------------
# Parser (precedence climbing)


class _Parser:
    def __init__(self, text: str, dim: int, time_dependent: bool):
        self.toks = _tokenize(text)
        self.pos = 0
        self.dim = dim
        self.time_dependent = time_dependent

    def peek(self):
        return self.toks[self.pos]

    def advance(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect_op(self, op: str):
        kind, txt, off = self.peek()
        if kind == "op" and txt == op:
            return self.advance()
        raise ParseError(f"unexpected token '{txt or 'end of input'}'", off, (op,))

    def parse(self) -> Node:
        node = self.additive()
        kind, txt, off = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input '{txt}'", off, ("end of input",))
        return node

    def additive(self) -> Node:
        node = self.multiplicative()
        while True:
            kind, txt, _ = self.peek()
            if kind == "op" and txt in "+-":
                self.advance()
                node = Bin(txt, node, self.multiplicative())
            else:
                return node

    def multiplicative(self) -> Node:
        node = self.unary()
        while True:
            kind, txt, _ = self.peek()
            if kind == "op" and txt in "*/":
                self.advance()
                node = Bin(txt, node, self.unary())
            else:
                return node

    def unary(self) -> Node:
        kind, txt, _ = self.peek()
        if kind == "op" and txt == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, txt, off = self.peek()
        if kind == "op" and txt == "^":
            self.advance()
            exp_node = self.unary()  # right-recursion via unary->power
            exponent = _fold_constant(exp_node, off)
            return Pow(base, exponent)
        return base

    def atom(self) -> Node:
        kind, txt, off = self.advance()
        if kind == "num":
            return Const(float(txt))
        if kind == "ident":
            if txt in FUNCTIONS:
                self.expect_op("(")
                arg = self.additive()
                k2, t2, o2 = self.peek()
                if k2 == "op" and t2 == ",":
                    raise ArityError(txt, 2, 1, o2)
                self.expect_op(")")
                return Call(txt, arg)
            if txt == "t":
                if not self.time_dependent:
                    raise UnknownIdentifierError("t", off)
                return TimeVar()
            if txt.startswith("x") and txt[1:].isdigit():
                idx = int(txt[1:]) - 1
                if not 0 <= idx < self.dim:
                    raise UnknownIdentifierError(txt, off)
                return Var(idx)
            raise UnknownIdentifierError(txt, off)
        if kind == "op" and txt == "(":
            node = self.additive()
            self.expect_op(")")
            return node
        raise ParseError(
            f"unexpected token '{txt or 'end of input'}'",
            off,
            ("number", "identifier", "(", "-"),
        )


def _fold_constant(n: Node, offset: int) -> float:
    """Exponents must fold to a constant; keeps d/dx(u^p) total."""
    if isinstance(n, Const):
        return n.value
    if isinstance(n, Neg):
        return -_fold_constant(n.arg, offset)
    if isinstance(n, Pow):
        return _fold_constant(n.base, offset) ** n.exponent
    if isinstance(n, Bin):
        a = _fold_constant(n.left, offset)
        b = _fold_constant(n.right, offset)
        return {"+": a + b, "-": a - b, "*": a * b, "/": a / b}[n.op]
    raise ParseError("exponent must be a constant expression", offset)


# ---------------------------------------------------------------------------
# Public types


@dataclass(frozen=True)
class Jet1:
    """First-order jet: value plus partials (length m), optionally a t-partial."""

    value: float
    partials: tuple[float, ...]
    t_partial: float | None = None

    @property
    def gradient(self) -> np.ndarray:
        return np.asarray(self.partials, dtype=float)


@dataclass(frozen=True)
class ScalarExpr:
    """Parsed smooth scalar function of x1..xm (and t if time_dependent)."""

    root: Node
    dim: int
    time_dependent: bool = False

    def __str__(self) -> str:
        return node_to_text(self.root)

    def eval(self, point, t: float | None = None) -> float:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise ValueError(f"point has shape {point.shape}, expected ({self.dim},)")
        if self.time_dependent and t is None:
            raise ValueError("expression is time-dependent; t required")
        return _eval(self.root, point, t)

    def eval_jet(self, point, t: float | None = None) -> Jet1:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise ValueError(f"point has shape {point.shape}, expected ({self.dim},)")
        if self.time_dependent and t is None:
            raise ValueError("expression is time-dependent; t required")
        nvars = self.dim + (1 if self.time_dependent else 0)
        v, g = _eval_jet(self.root, point, t, nvars, self.dim)
        tp = g[self.dim] if self.time_dependent else None
        return Jet1(v, tuple(g[: self.dim]), tp)

    def shift_vars(self, by: int, new_dim: int, time_to_var: int | None = None) -> "ScalarExpr":
        """Reindex x_i -> x_{i+by}; optionally map t onto variable `time_to_var`.

        Used to embed time-dependent data into an autonomous base (suspension,
        cylinder lifts)."""
        root = _remap(self.root, by, time_to_var)
        return ScalarExpr(root, new_dim, False if time_to_var is not None else self.time_dependent)


def parse(text: str, dim: int, time_dependent: bool = False) -> ScalarExpr:
    if dim < 0:
        raise ValueError("dim must be >= 0")
    return ScalarExpr(_Parser(text, dim, time_dependent).parse(), dim, time_dependent)


# ---------------------------------------------------------------------------
# Evaluation


def _eval(n: Node, x: np.ndarray, t: float | None) -> float:
    if isinstance(n, Const):
        return n.value
    if isinstance(n, Var):
        return float(x[n.index])
    if isinstance(n, TimeVar):
        return float(t)  # type: ignore[arg-type]
    if isinstance(n, Neg):
        return -_eval(n.arg, x, t)
    if isinstance(n, Call):
        return _apply(n.name, _eval(n.arg, x, t), n)
    if isinstance(n, Bin):
        a = _eval(n.left, x, t)
        b = _eval(n.right, x, t)
        if n.op == "+":
            return a + b
        if n.op == "-":
            return a - b
        if n.op == "*":
            return a * b
        if b == 0.0:
            raise EvalDomainError("division by zero", node_to_text(n))
        return a / b
    if isinstance(n, Pow):
        b = _eval(n.base, x, t)
        return _pow(b, n.exponent, n)
    raise TypeError(f"not an AST node: {n!r}")


def _apply(name: str, v: float, n: Node) -> float:
    if name == "sin":
        return math.sin(v)
    if name == "cos":
        return math.cos(v)
    if name == "exp":
        return math.exp(v)
    if name == "tanh":
        return math.tanh(v)
    if name == "log":
        if v <= 0.0:
            raise EvalDomainError(f"log of nonpositive value {v!r}", node_to_text(n))
        return math.log(v)
    if name == "sqrt":
        if v < 0.0:
            raise EvalDomainError(f"sqrt of negative value {v!r}", node_to_text(n))
        return math.sqrt(v)
    raise TypeError(f"unknown function {name}")


def _pow(base: float, p: float, n: Node) -> float:
    if base == 0.0 and p < 0:
        raise EvalDomainError("zero raised to negative power", node_to_text(n))
    if base < 0.0 and p != int(p):
        raise EvalDomainError("negative base with non-integer exponent", node_to_text(n))
    return base ** p


def _eval_jet(n: Node, x: np.ndarray, t: float | None, nvars: int, dim: int):
    if isinstance(n, Const):
        return n.value, np.zeros(nvars)
    if isinstance(n, Var):
        g = np.zeros(nvars)
        g[n.index] = 1.0
        return float(x[n.index]), g
    if isinstance(n, TimeVar):
        g = np.zeros(nvars)
        g[dim] = 1.0
        return float(t), g  # type: ignore[arg-type]
    if isinstance(n, Neg):
        v, g = _eval_jet(n.arg, x, t, nvars, dim)
        return -v, -g
    if isinstance(n, Call):
        v, g = _eval_jet(n.arg, x, t, nvars, dim)
        val = _apply(n.name, v, n)
        if n.name == "sin":
            d = math.cos(v)
        elif n.name == "cos":
            d = -math.sin(v)
        elif n.name == "exp":
            d = val
        elif n.name == "tanh":
            d = 1.0 - val * val
        elif n.name == "log":
            d = 1.0 / v
        else:  # sqrt
            if v == 0.0:
                raise EvalDomainError("sqrt derivative singular at 0", node_to_text(n))
            d = 0.5 / val
        return val, d * g
    if isinstance(n, Bin):
        av, ag = _eval_jet(n.left, x, t, nvars, dim)
        bv, bg = _eval_jet(n.right, x, t, nvars, dim)
        if n.op == "+":
            return av + bv, ag + bg
        if n.op == "-":
            return av - bv, ag - bg
        if n.op == "*":
            return av * bv, av * bg + bv * ag
        if bv == 0.0:
            raise EvalDomainError("division by zero", node_to_text(n))
        return av / bv, (ag * bv - av * bg) / (bv * bv)
    if isinstance(n, Pow):
        bv, bg = _eval_jet(n.base, x, t, nvars, dim)
        val = _pow(bv, n.exponent, n)
        if n.exponent == 0.0:
            return 1.0, np.zeros(nvars)
        if bv == 0.0 and n.exponent < 1.0 and n.exponent != int(n.exponent):
            raise EvalDomainError("power derivative singular at 0", node_to_text(n))
        d = n.exponent * _pow(bv, n.exponent - 1.0, n)
        return val, d * bg
    raise TypeError(f"not an AST node: {n!r}")


def _remap(n: Node, by: int, time_to_var: int | None) -> Node:
    if isinstance(n, (Const,)):
        return n
    if isinstance(n, Var):
        return Var(n.index + by)
    if isinstance(n, TimeVar):
        if time_to_var is None:
            return n
        return Var(time_to_var)
    if isinstance(n, Neg):
        return Neg(_remap(n.arg, by, time_to_var))
    if isinstance(n, Call):
        return Call(n.name, _remap(n.arg, by, time_to_var))
    if isinstance(n, Bin):
        return Bin(n.op, _remap(n.left, by, time_to_var), _remap(n.right, by, time_to_var))
    if isinstance(n, Pow):
        return Pow(_remap(n.base, by, time_to_var), n.exponent)
    raise TypeError(f"not an AST node: {n!r}")
