"""A small arithmetic language for user supplied functions of ``x``.

Grammar (lowest to highest precedence)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right associative
    atom   := NUMBER | "x" | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Functions: ``abs exp log sqrt`` (one argument) and ``min max`` (two).
Expressions evaluate on floats and on numpy arrays.

>>> e = parse("2*x^2 - 1")
>>> e
Sub(Mul(2, Pow(Var, 2)), 1)
>>> e(3.0)
17.0
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ExprSyntaxError

__all__ = ["Expr", "Const", "Var", "Neg", "Call", "BinOp", "parse", "evaluate", "to_text"]

_UNARY = {"abs": np.abs, "exp": np.exp, "log": np.log, "sqrt": np.sqrt}
_BINARY = {"min": np.minimum, "max": np.maximum}
_OPNAME = {"+": "Add", "-": "Sub", "*": "Mul", "/": "Div", "^": "Pow"}


class Expr:
    """Base class of expression nodes; instances are immutable."""

    def __call__(self, x):
        return evaluate(self, x)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float

    def __repr__(self):
        v = self.value
        return repr(int(v)) if float(v).is_integer() and abs(v) < 1e16 else repr(v)


@dataclass(frozen=True, repr=False)
class Var(Expr):
    def __repr__(self):
        return "Var"


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr

    def __repr__(self):
        return f"Neg({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Call(Expr):
    name: str
    args: tuple[Expr, ...]

    def __repr__(self):
        return f"{self.name.capitalize()}({', '.join(map(repr, self.args))})"


@dataclass(frozen=True, repr=False)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def __repr__(self):
        return f"{_OPNAME[self.op]}({self.left!r}, {self.right!r})"


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                self._fail(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def _fail(self, message: str, pos: int):
        offset = len(self.text[:pos].encode("utf-8"))
        raise ExprSyntaxError(message, offset, self.text)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.peek()
        if val != value or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            self._fail(f"expected {value!r}, found {found}", pos)
        self.i += 1

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            self._fail(f"expected operator or end of input, found {val!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val == "x":
                return Var()
            if val in _UNARY or val in _BINARY:
                arity = 1 if val in _UNARY else 2
                self.expect("(")
                args = [self.expr()]
                while len(args) < arity:
                    self.expect(",")
                    args.append(self.expr())
                self.expect(")")
                return Call(val, tuple(args))
            self._fail(f"unknown name {val!r}", pos)
        if (kind, val) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        self._fail(f"expected number, 'x', function or '(', found {found}", pos)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises
    ------
    ExprSyntaxError
        With the byte offset of the offending token.
    """
    return _Parser(text).parse()


def _bad(mask) -> bool:
    return bool(np.any(mask))


def evaluate(e: Expr, x):
    """Evaluate ``e`` at ``x`` (float or array).

    Raises
    ------
    DomainError
        For the logarithm or square root of an invalid argument, division
        by zero, zero to a negative power or a negative base with a
        non-integer exponent.
    """
    xa = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(e, xa)
    out = np.asarray(out, dtype=float)
    if out.shape != xa.shape:
        out = np.broadcast_to(out, xa.shape).copy()
    return float(out) if out.ndim == 0 else out


def _eval(e: Expr, x):
    if isinstance(e, Const):
        return np.float64(e.value)
    if isinstance(e, Var):
        return x
    if isinstance(e, Neg):
        return -_eval(e.arg, x)
    if isinstance(e, Call):
        args = [_eval(a, x) for a in e.args]
        if e.name == "log" and _bad(args[0] <= 0):
            raise DomainError("log of a non-positive number")
        if e.name == "sqrt" and _bad(args[0] < 0):
            raise DomainError("square root of a negative number")
        if e.name in _UNARY:
            return _UNARY[e.name](args[0])
        return _BINARY[e.name](args[0], args[1])
    a = _eval(e.left, x)
    b = _eval(e.right, x)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        if _bad(b == 0):
            raise DomainError("division by zero")
        return a / b
    if _bad((a == 0) & (b < 0)):
        raise DomainError("zero raised to a negative power")
    if _bad((a < 0) & (b != np.round(b))):
        raise DomainError("negative base with a non-integer exponent")
    return np.power(a, b)


def to_text(e: Expr) -> str:
    """Render ``e`` as fully parenthesised source text."""
    if isinstance(e, Const):
        v = float(e.value)
        if v != v:
            raise ValueError("NaN constants have no source form")
        text = repr(abs(v)) if abs(v) != np.inf else "1e999"
        # negative constants only arise from trees built by hand
        return f"(-{text})" if np.signbit(v) else text
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Neg):
        return f"(-{to_text(e.arg)})"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_text(a) for a in e.args)})"
    return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
