"""A small scalar expression language for warping functions, metrics and graphs.

Grammar (loosest binding first)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Expressions evaluate over any carrier that supports ``+ - * /`` and the
functions below: Python floats, numpy arrays (vectorised sampling) and
:class:`~grwlab.jets.Jet` (derivatives).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from grwlab import jets
from grwlab.jets import Jet


class ParseError(ValueError):
    def __init__(self, offset: int, message: str, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.message = message
        self.expected = expected
        exp = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"offset {offset}: {message}{exp}")


class UnboundVariableError(LookupError):
    pass


class ExprDomainError(ValueError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Call]

FUNCTIONS = {"exp": 1, "log": 1, "sqrt": 1, "sin": 1, "cos": 1, "sinh": 1, "cosh": 1, "pow": 2}

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(source):
        mt = _TOKEN.match(source, pos)
        if mt is None:
            raise ParseError(_byte_offset(source, pos), f"unexpected character {source[pos]!r}")
        if mt.lastgroup != "ws":
            toks.append(_Tok(mt.lastgroup, mt.group(), _byte_offset(source, pos)))
        pos = mt.end()
    toks.append(_Tok("end", "", _byte_offset(source, len(source))))
    return toks


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.text != text or tok.kind == "end":
            raise ParseError(tok.offset, f"expected {text!r}, found {tok.text or 'end of input'!r}", frozenset({text}))
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(tok.offset, f"trailing input {tok.text!r}", frozenset({"+", "-", "*", "/", "^", "end of input"}))
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.peek().text == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[tok.text]:
                    raise ParseError(tok.offset, f"{tok.text} takes {FUNCTIONS[tok.text]} argument(s), got {len(args)}")
                return Call(tok.text, tuple(args))
            if self.peek().text == "(":
                raise ParseError(tok.offset, f"unknown function {tok.text!r}", frozenset(FUNCTIONS))
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(
            tok.offset,
            f"expected an operand, found {tok.text or 'end of input'!r}",
            frozenset({"number", "name", "(", "-"}),
        )


def parse(source: str) -> Expr:
    """Parse ``source`` into an expression tree; raises :class:`ParseError`."""
    return _Parser(source).parse()


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Var):
        return frozenset({e.name})
    if isinstance(e, Neg):
        return free_vars(e.operand)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    return frozenset().union(*(free_vars(a) for a in e.args))


def pretty(e: Expr) -> str:
    """Fully parenthesised source text that re-parses to the same tree."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{pretty(e.operand)})"
    if isinstance(e, BinOp):
        return f"({pretty(e.left)} {e.op} {pretty(e.right)})"
    return f"{e.func}({', '.join(pretty(a) for a in e.args)})"


# ------------------------------------------------------------------ evaluation
def _check_domain(name: str, x, ok) -> None:
    if not np.all(ok):
        raise ExprDomainError(f"{name} outside its domain at {x!r}")


def _log(x):
    if isinstance(x, Jet):
        return jets.jet_log(x)
    _check_domain("log", x, np.asarray(x) > 0)
    return np.log(x) if isinstance(x, np.ndarray) else float(np.log(x))


def _sqrt(x):
    if isinstance(x, Jet):
        return jets.jet_sqrt(x)
    _check_domain("sqrt", x, np.asarray(x) >= 0)
    return np.sqrt(x) if isinstance(x, np.ndarray) else float(np.sqrt(x))


def _pow(a, b):
    if isinstance(a, Jet):
        return jets.jet_pow(a, b)
    if isinstance(b, Jet):
        _check_domain("pow", a, np.asarray(a) > 0)
        return jets.jet_exp(b * math.log(a))
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        integral = np.all(np.asarray(b) == np.round(b))
        _check_domain("pow", a, (np.asarray(a) > 0) | integral)
        return np.power(np.asarray(a, dtype=float), b)
    b = float(b)
    if b.is_integer():
        # same multiplication chain as the jet path, so values agree bit for bit
        out = 1.0
        for _ in range(int(abs(b))):
            out = out * a
        if b < 0:
            if out == 0:
                raise ZeroDivisionError("zero to a negative power")
            return 1.0 / out
        return float(out)
    if a < 0:
        raise ExprDomainError(f"non-integer power {b!r} of negative base {a!r}")
    return float(np.float64(a) ** b)


def _elementary(name: str):
    jet_fn = getattr(jets, f"jet_{name}")
    np_fn = getattr(np, name)

    def fn(x):
        if isinstance(x, Jet):
            return jet_fn(x)
        if isinstance(x, np.ndarray):
            return np_fn(x)
        return float(np_fn(x))  # numpy, like the jet path's order-0 coefficient

    return fn


_IMPL = {
    "exp": _elementary("exp"),
    "sin": _elementary("sin"),
    "cos": _elementary("cos"),
    "sinh": _elementary("sinh"),
    "cosh": _elementary("cosh"),
    "log": _log,
    "sqrt": _sqrt,
    "pow": _pow,
}


def _div(a, b):
    if isinstance(b, (int, float)) and b == 0:
        raise ZeroDivisionError("division by zero in expression")
    if isinstance(b, np.ndarray) and np.any(b == 0):
        raise ZeroDivisionError("division by zero in expression")
    return a / b


def evaluate(e: Expr, env: Mapping[str, object]):
    """Value of ``e`` with variables bound by ``env`` in the carrier's arithmetic."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariableError(f"variable {e.name!r} is not bound") from None
    if isinstance(e, Neg):
        return -evaluate(e.operand, env)
    if isinstance(e, BinOp):
        a = evaluate(e.left, env)
        b = evaluate(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            return _div(a, b)
        return _pow(a, b)
    return _IMPL[e.func](*(evaluate(a, env) for a in e.args))


def as_expr(source: Union[str, float, int, Expr]) -> Expr:
    """Accept expression text, a number, or an already parsed tree."""
    if isinstance(source, (Num, Var, Neg, BinOp, Call)):
        return source
    if isinstance(source, (int, float)):
        return Num(float(source))
    return parse(source)
