"""Small expression language for scenario files.

Expressions are parsed with a Pratt parser over a fixed operator table and
compiled to closures that evaluate on floats or numpy arrays.  Binding
powers, loosest first::

    + -        10  left
    * /        20  left
    unary -    25  prefix (so ``-2^2 == -(2^2)``)
    ^          30  right

Domain errors (log of a nonpositive number, division by zero, ...) raise
:class:`DomainError` instead of producing NaN.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from .errors import HamcalError

__all__ = [
    "Num", "Var", "Unary", "Binary", "Call", "Expression",
    "ExprError", "ParseError", "EvalError", "MissingBinding", "DomainError",
    "parse", "evaluate", "to_source", "to_sexpr", "bump", "FUNCTIONS",
]


class ExprError(HamcalError):
    pass


class ParseError(ExprError, ValueError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset
        self.message = message


class EvalError(ExprError):
    pass


class MissingBinding(EvalError, KeyError):
    def __str__(self):
        return self.args[0]


class DomainError(EvalError, ArithmeticError):
    pass


# --------------------------------------------------------------------- AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Unary, Binary, Call]


# ---------------------------------------------------------------- functions

def _fail_where(mask, message):
    if np.any(mask):
        raise DomainError(message)


def bump(s):
    """Smooth cutoff ``exp(1 - 1/(1 - s^2))`` on ``|s| < 1``, zero elsewhere."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    denom = np.where(inside, 1.0 - s * s, 1.0)
    out = np.where(inside, np.exp(1.0 - 1.0 / denom), 0.0)
    return out if out.ndim else float(out)


def _log(a):
    _fail_where(np.asarray(a) <= 0, "log of a nonpositive number")
    return np.log(a)


def _sqrt(a):
    _fail_where(np.asarray(a) < 0, "sqrt of a negative number")
    return np.sqrt(a)


def _pow(a, b):
    if isinstance(b, float) and b >= 0 and b.is_integer():
        return np.multiply(a, a) if b == 2.0 else np.power(a, b)
    a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    bad = (a_arr < 0) & (b_arr != np.round(b_arr))
    _fail_where(bad, "fractional power of a negative number")
    _fail_where((a_arr == 0) & (b_arr < 0), "zero raised to a negative power")
    return np.power(a_arr, b_arr)


def _div(a, b):
    _fail_where(np.asarray(b) == 0, "division by zero")
    return np.divide(a, b)


# name -> (arity, implementation)
FUNCTIONS: dict[str, tuple[int, Callable]] = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "exp": (1, np.exp),
    "log": (1, _log),
    "sqrt": (1, _sqrt),
    "abs": (1, np.abs),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
    "pow": (2, _pow),
    "bump": (1, bump),
}

CONSTANTS = {"pi": math.pi}

_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": _div,
    "^": _pow,
}

# ------------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | name | op | end
    text: str
    offset: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        m = _TOKEN.match(source, pos)
        if m is None:
            rest = source[pos:]
            if rest.strip() == "":
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise ParseError(bad, f"unexpected character {source[bad]!r}")
        kind = m.lastgroup
        text = m.group(kind)
        toks.append(_Tok(kind, "^" if text == "**" else text, m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(source)))
    return toks


# ------------------------------------------------------------------ parser

_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_UNARY_BP = 25


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.tok
        if t.text != text or t.kind != "op":
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise ParseError(t.offset, f"expected {text!r}, found {found}")
        return self.advance()

    def expression(self, rbp: int = 0) -> Node:
        left = self.nud(self.advance())
        while self.tok.kind == "op" and rbp < _LBP.get(self.tok.text, 0):
            op = self.advance().text
            # right associativity for power: parse rhs one notch looser
            right = self.expression(_LBP[op] - 1 if op == "^" else _LBP[op])
            left = Binary(op, left, right)
        return left

    def nud(self, t: _Tok) -> Node:
        if t.kind == "num":
            return Num(float(t.text))
        if t.kind == "name":
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(t)
            if t.text in CONSTANTS:
                return Num(CONSTANTS[t.text])
            return Var(t.text)
        if t.kind == "op" and t.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        if t.kind == "op" and t.text in "+-":
            operand = self.expression(_UNARY_BP)
            return operand if t.text == "+" else Unary("-", operand)
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(t.offset, f"expected a number, name or '(', found {found}")

    def call(self, name_tok: _Tok) -> Node:
        if name_tok.text not in FUNCTIONS:
            raise ParseError(name_tok.offset, f"unknown function {name_tok.text!r}")
        arity = FUNCTIONS[name_tok.text][0]
        self.expect("(")
        args = [self.expression(0)]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expression(0))
        self.expect(")")
        if len(args) != arity:
            raise ParseError(
                name_tok.offset,
                f"{name_tok.text} takes {arity} argument(s), got {len(args)}",
            )
        return Call(name_tok.text, tuple(args))


def _free_vars(node: Node) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, Unary):
        return _free_vars(node.operand)
    if isinstance(node, Binary):
        return _free_vars(node.left) | _free_vars(node.right)
    if isinstance(node, Call):
        out = frozenset()
        for a in node.args:
            out |= _free_vars(a)
        return out
    return frozenset()


def _compile(node: Node) -> Callable[[Mapping], object]:
    if isinstance(node, Num):
        v = node.value
        return lambda env: v
    if isinstance(node, Var):
        name = node.name
        return lambda env: env[name]
    if isinstance(node, Unary):
        f = _compile(node.operand)
        return lambda env: np.negative(f(env))
    if isinstance(node, Binary):
        fl, fr, op = _compile(node.left), _compile(node.right), _BINARY[node.op]
        return lambda env: op(fl(env), fr(env))
    fn = FUNCTIONS[node.name][1]
    argf = [_compile(a) for a in node.args]
    if len(argf) == 1:
        (a0,) = argf
        return lambda env: fn(a0(env))
    return lambda env: fn(*(a(env) for a in argf))


class Expression:
    """Parsed, immutable expression."""

    __slots__ = ("source", "ast", "free_vars", "_fn")

    def __init__(self, source: str, ast: Node):
        self.source = source
        self.ast = ast
        self.free_vars = _free_vars(ast)
        self._fn = _compile(ast)

    def __call__(self, **bindings):
        return evaluate(self, bindings)

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and self.ast == other.ast

    def __hash__(self):
        return hash(self.ast)


def parse(source: str) -> Expression:
    if not isinstance(source, str) or not source.strip():
        raise ParseError(0, "empty expression")
    p = _Parser(source)
    ast = p.expression(0)
    if p.tok.kind != "end":
        raise ParseError(p.tok.offset, f"expected operator or end of input, found {p.tok.text!r}")
    return Expression(source, ast)


def evaluate(e: Expression | str, bindings: Mapping[str, object]):
    """Evaluate ``e`` under ``bindings``; values may be floats or arrays."""
    if isinstance(e, str):
        e = parse(e)
    missing = e.free_vars.difference(bindings)
    if missing:
        raise MissingBinding(f"missing binding for {', '.join(sorted(missing))}")
    with np.errstate(all="ignore"):
        out = e._fn(bindings)
    if not np.all(np.isfinite(out)):
        raise DomainError(f"non-finite value evaluating {e.source!r}")
    if np.ndim(out) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------- printing

def to_source(node: Node | Expression) -> str:
    """Fully parenthesized source that reparses to the same tree."""
    if isinstance(node, Expression):
        node = node.ast
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    return f"{node.name}({', '.join(to_source(a) for a in node.args)})"


def to_sexpr(node: Node | Expression) -> str:
    if isinstance(node, Expression):
        node = node.ast
    if isinstance(node, Num):
        v = node.value
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"(neg {to_sexpr(node.operand)})"
    if isinstance(node, Binary):
        return f"({node.op} {to_sexpr(node.left)} {to_sexpr(node.right)})"
    return f"({node.name} {' '.join(to_sexpr(a) for a in node.args)})"
