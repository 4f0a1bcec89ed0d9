"""Scalar expression language for metric components and profile functions.

Grammar (precedence high to low)::

    atom    := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'
    power   := atom ('^' ['+'|'-'] INT)*        right associative
    unary   := '-' unary | power
    term    := unary (('*' | '/') unary)*       left associative
    expr    := term (('+' | '-') term)*         left associative

Names resolve to chart coordinates first, then to parameters.  Exponents are
signed integer literals with ``|k| <= 64``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from . import jets
from .jets import DomainError, UNIVARIATE

MAX_EXPONENT = 64


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifier(ValueError):
    def __init__(self, name: str, position: int | None = None):
        where = "" if position is None else f" at position {position}"
        super().__init__(f"unknown identifier {name!r}{where}")
        self.name = name


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Coord:
    index: int
    name: str = ""


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int

    def __post_init__(self):
        if abs(self.exponent) > MAX_EXPONENT:
            raise ValueError(f"exponent {self.exponent} exceeds |k| <= {MAX_EXPONENT}")


@dataclass(frozen=True)
class Func:
    name: str
    arg: "Expr"

    def __post_init__(self):
        if self.name not in UNIVARIATE:
            raise ValueError(f"unsupported function {self.name!r}")


Expr = Union[Const, Coord, Param, Neg, Add, Sub, Mul, Div, Pow, Func]
BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    pos = 0
    tokens = []
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = len(source[pos:]) - len(source[pos:].lstrip()) + pos
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source, coords, params):
        self.tokens = _tokenize(source)
        self.i = 0
        self.coords = {name: k for k, name in enumerate(coords)}
        self.params = set(params)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def exponent(self):
        sign = 1
        if self.peek()[:2] in (("op", "-"), ("op", "+")):
            sign = -1 if self.take()[1] == "-" else 1
        kind, text, pos = self.take()
        if kind != "num" or not text.isdigit():
            raise ExprSyntaxError("exponent must be an integer literal", pos)
        k = sign * int(text)
        if self.peek()[:2] == ("op", "^"):
            self.take()
            k = k ** self.exponent()
            if int(k) != k:
                raise ExprSyntaxError("exponent must be an integer", pos)
        if abs(k) > MAX_EXPONENT:
            raise ExprSyntaxError(f"exponent {k} exceeds |k| <= {MAX_EXPONENT}", pos)
        return int(k)

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Pow(base, self.exponent())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if text not in UNIVARIATE:
                    raise UnknownIdentifier(text, pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            if text in self.coords:
                return Coord(self.coords[text], text)
            if text in self.params:
                return Param(text)
            raise UnknownIdentifier(text, pos)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos)


def parse(source: str, coordinates: Sequence[str] = (), parameters: Sequence[str] = ()) -> Expr:
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    names = list(coordinates) + list(parameters)
    if len(set(names)) != len(names):
        raise ValueError("coordinate and parameter names must be distinct")
    for name in names:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name) or name in UNIVARIATE:
            raise ValueError(f"invalid identifier {name!r}")
    return _Parser(source, coordinates, parameters).parse()


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e) -> int:
    if isinstance(e, Const) and e.value < 0:
        return 3
    return _PREC.get(type(e), 5)


def _num(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError("non-finite constant cannot be printed")
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_source(e: Expr) -> str:
    if isinstance(e, Const):
        return _num(e.value)
    if isinstance(e, Coord):
        if not e.name:
            raise ValueError("coordinate without a name cannot be printed")
        return e.name
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        return "-" + (f"({inner})" if _prec(e.arg) < 3 else inner)
    if isinstance(e, Pow):
        base = to_source(e.base)
        if _prec(e.base) < 5:
            base = f"({base})"
        return f"{base}^{e.exponent}"
    op = BINARY[type(e)]
    p = _PREC[type(e)]
    left = to_source(e.left)
    if _prec(e.left) < p:
        left = f"({left})"
    right = to_source(e.right)
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {op} {right}"


# ---------------------------------------------------------------------------
# symbolic differentiation
# ---------------------------------------------------------------------------

ZERO = Const(0.0)
ONE = Const(1.0)


def _is(e, v):
    return isinstance(e, Const) and e.value == v


def _mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    return Mul(a, b)


def _add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return Add(a, b)


def _sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return Neg(b)
    return Sub(a, b)


def _neg(a):
    if _is(a, 0):
        return ZERO
    return Neg(a)


def differentiate(e: Expr, index: int) -> Expr:
    """Exact partial derivative with respect to coordinate ``index``."""
    d = lambda x: differentiate(x, index)  # noqa: E731
    if isinstance(e, (Const, Param)):
        return ZERO
    if isinstance(e, Coord):
        return ONE if e.index == index else ZERO
    if isinstance(e, Neg):
        return _neg(d(e.arg))
    if isinstance(e, Add):
        return _add(d(e.left), d(e.right))
    if isinstance(e, Sub):
        return _sub(d(e.left), d(e.right))
    if isinstance(e, Mul):
        return _add(_mul(d(e.left), e.right), _mul(e.left, d(e.right)))
    if isinstance(e, Div):
        da, db = d(e.left), d(e.right)
        first = _mul(da, Div(ONE, e.right)) if not _is(da, 0) else ZERO
        if _is(db, 0):
            return first
        second = Div(_mul(e.left, db), Pow(e.right, 2))
        return _sub(first, second)
    if isinstance(e, Pow):
        k = e.exponent
        db = d(e.base)
        if k == 0 or _is(db, 0):
            return ZERO
        lowered = e.base if k == 2 else Pow(e.base, k - 1)
        if k - 1 == 0:
            lowered = ONE
        core = _mul(Const(float(abs(k))), lowered)
        core = _mul(core, db)
        return _neg(core) if k < 0 else core
    if isinstance(e, Func):
        da = d(e.arg)
        if _is(da, 0):
            return ZERO
        a = e.arg
        outer = {
            "sin": lambda: Func("cos", a),
            "cos": lambda: Neg(Func("sin", a)),
            "exp": lambda: e,
            "log": lambda: Div(ONE, a),
            "sqrt": lambda: Div(ONE, Mul(Const(2.0), e)),
            "sinh": lambda: Func("cosh", a),
            "cosh": lambda: Func("sinh", a),
        }[e.name]()
        if _is(da, 1):
            return outer
        if isinstance(outer, Neg):
            return Neg(_mul(outer.arg, da))
        return _mul(outer, da)
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

_FLOAT_FUNCS = {
    "sin": math.sin, "cos": math.cos, "exp": math.exp, "sinh": math.sinh,
    "cosh": math.cosh,
}


def evaluate(e: Expr, point: Sequence[float], parameters: Mapping[str, float] | None = None) -> float:
    """Plain floating-point evaluation (independent of the jet machinery)."""
    params = parameters or {}

    def ev(x):
        if isinstance(x, Const):
            return x.value
        if isinstance(x, Coord):
            return float(point[x.index])
        if isinstance(x, Param):
            if x.name not in params:
                raise UnknownIdentifier(x.name)
            return float(params[x.name])
        if isinstance(x, Neg):
            return -ev(x.arg)
        if isinstance(x, Add):
            return ev(x.left) + ev(x.right)
        if isinstance(x, Sub):
            return ev(x.left) - ev(x.right)
        if isinstance(x, Mul):
            return ev(x.left) * ev(x.right)
        if isinstance(x, Div):
            den = ev(x.right)
            if den == 0.0:
                raise DomainError("division by zero")
            return ev(x.left) / den
        if isinstance(x, Pow):
            b = ev(x.base)
            if b == 0.0 and x.exponent < 0:
                raise DomainError("division by zero")
            return b ** x.exponent
        if isinstance(x, Func):
            a = ev(x.arg)
            if x.name == "log":
                if a <= 0:
                    raise DomainError("log of a non-positive value")
                return math.log(a)
            if x.name == "sqrt":
                if a < 0:
                    raise DomainError("sqrt of a negative value")
                return math.sqrt(a)
            return _FLOAT_FUNCS[x.name](a)
        raise TypeError(f"not an expression node: {x!r}")

    return ev(e)


def eval_jet_array(e: Expr, point: Sequence[float], parameters: Mapping[str, float] | None,
                   lay: jets.JetLayout) -> np.ndarray:
    """Coefficient array of the Taylor jet of ``e`` about ``point``."""
    params = parameters or {}
    if len(point) != lay.nvars:
        raise ValueError(f"point has {len(point)} coordinates, chart has {lay.nvars}")

    def ev(x):
        if isinstance(x, Const):
            return jets.constant(x.value, lay)
        if isinstance(x, Coord):
            if x.index >= lay.nvars:
                raise IndexError(f"coordinate index {x.index} >= dimension {lay.nvars}")
            return jets.variable(x.index, float(point[x.index]), lay)
        if isinstance(x, Param):
            if x.name not in params:
                raise UnknownIdentifier(x.name)
            return jets.constant(float(params[x.name]), lay)
        if isinstance(x, Neg):
            return -ev(x.arg)
        if isinstance(x, Add):
            return ev(x.left) + ev(x.right)
        if isinstance(x, Sub):
            return ev(x.left) - ev(x.right)
        if isinstance(x, Mul):
            return jets.mul(ev(x.left), ev(x.right), lay)
        if isinstance(x, Div):
            return jets.div(ev(x.left), ev(x.right), lay)
        if isinstance(x, Pow):
            return jets.power(ev(x.base), x.exponent, lay)
        if isinstance(x, Func):
            return jets.compose(x.name, ev(x.arg), lay)
        raise TypeError(f"not an expression node: {x!r}")

    return ev(e)


def eval_jet(e: Expr, point: Sequence[float], parameters: Mapping[str, float] | None,
             order: int) -> jets.Jet:
    lay = jets.layout(len(point), order)
    return jets.Jet(lay.nvars, order, eval_jet_array(e, point, parameters, lay))


def coordinates_used(e: Expr) -> set[int]:
    if isinstance(e, Coord):
        return {e.index}
    if isinstance(e, (Const, Param)):
        return set()
    if isinstance(e, (Neg, Func)):
        return coordinates_used(e.arg)
    if isinstance(e, Pow):
        return coordinates_used(e.base)
    return coordinates_used(e.left) | coordinates_used(e.right)


def parameters_used(e: Expr) -> set[str]:
    if isinstance(e, Param):
        return {e.name}
    if isinstance(e, (Const, Coord)):
        return set()
    if isinstance(e, (Neg, Func)):
        return parameters_used(e.arg)
    if isinstance(e, Pow):
        return parameters_used(e.base)
    return parameters_used(e.left) | parameters_used(e.right)


def polynomial(coefs: Sequence[float], var: Expr) -> Expr:
    """``sum_k coefs[k] var^k`` as an expression tree (zero terms dropped)."""
    node = None
    for k, c in enumerate(coefs):
        if c == 0:
            continue
        mono = ONE if k == 0 else (var if k == 1 else Pow(var, k))
        term = Const(abs(float(c))) if k == 0 else _mul(Const(abs(float(c))), mono)
        if node is None:
            node = Neg(term) if c < 0 else term
        else:
            node = Sub(node, term) if c < 0 else Add(node, term)
    return node if node is not None else ZERO
