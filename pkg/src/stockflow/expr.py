"""Arithmetic expressions used as flow and auxiliary-variable functions.

An expression is a closed AST over numeric constants, named parameters,
positional references to linked stocks (`LinkRef`) and to linked sum
variables (`SumVarRef`).  Slot ``k`` of a flow or variable refers to the
``k``-th link targeting it, in link-table order.

The surface syntax is ordinary infix notation:

    beta * S * I / N
    min(demand, capacity) - exp(-k * t_half)

with precedence ``^`` > unary ``-`` > ``*`` ``/`` > ``+`` ``-``, ``^``
right-associative, everything else left-associative, and ``exp``, ``log``,
``min``, ``max`` as functions.  A negative literal in text parses as unary
negation of a non-negative constant; formatting emits the same shape, so
parse and format are mutually inverse on parser output.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

from .errors import (
    AmbiguousName,
    ArityMismatch,
    DivisionByZero,
    DomainError,
    ExpressionSyntaxError,
    UnknownParameter,
)

__all__ = [
    "Const",
    "Param",
    "LinkRef",
    "SumVarRef",
    "Unary",
    "Binary",
    "Expression",
    "eval_expression",
    "parse_expression",
    "format_expression",
    "expression_arity",
    "expression_params",
    "UNARY_OPS",
    "BINARY_OPS",
]

UNARY_OPS = ("neg", "exp", "log")
BINARY_OPS = ("add", "sub", "mul", "div", "pow", "min", "max")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class LinkRef:
    slot: int


@dataclass(frozen=True)
class SumVarRef:
    slot: int


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expression"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expression"
    right: "Expression"


Expression = Union[Const, Param, LinkRef, SumVarRef, Unary, Binary]


# --- evaluation -----------------------------------------------------------


def eval_expression(
    expr: Expression,
    link_values: Sequence[float] = (),
    sumvar_values: Sequence[float] = (),
    params: Mapping[str, float] | None = None,
) -> float:
    """Evaluate `expr` with IEEE double semantics.

    `link_values[k]` feeds `LinkRef(k)`, `sumvar_values[k]` feeds
    `SumVarRef(k)`.  Deterministic: same inputs give bit-identical output.
    Inputs are coerced to Python floats so numpy scalars evaluate with
    the same overflow behavior (silent inf) as plain floats.
    """
    if params is None:
        params = {}
    return _eval(
        expr, [float(v) for v in link_values], [float(v) for v in sumvar_values], params
    )


def _eval(expr, links, sumvars, params):
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Param):
        try:
            return params[expr.name]
        except KeyError:
            raise UnknownParameter(f"parameter '{expr.name}' is not bound", expr.name) from None
    if isinstance(expr, LinkRef):
        if not 0 <= expr.slot < len(links):
            raise ArityMismatch(f"link slot {expr.slot} out of range (arity {len(links)})")
        return links[expr.slot]
    if isinstance(expr, SumVarRef):
        if not 0 <= expr.slot < len(sumvars):
            raise ArityMismatch(f"sum-variable slot {expr.slot} out of range (arity {len(sumvars)})")
        return sumvars[expr.slot]
    if isinstance(expr, Unary):
        v = _eval(expr.child, links, sumvars, params)
        if expr.op == "neg":
            return -v
        if expr.op == "exp":
            try:
                return math.exp(v)
            except OverflowError:
                return math.inf
        if expr.op == "log":
            if v <= 0:
                raise DomainError(f"log of non-positive value {v!r}")
            return math.log(v)
        raise ArityMismatch(f"unknown unary operator {expr.op!r}")
    if isinstance(expr, Binary):
        a = _eval(expr.left, links, sumvars, params)
        b = _eval(expr.right, links, sumvars, params)
        op = expr.op
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if op == "div":
            if b == 0:
                raise DivisionByZero(f"division by zero ({a!r} / 0)")
            return a / b
        if op == "pow":
            return _pow(a, b)
        if op == "min":
            return min(a, b)
        if op == "max":
            return max(a, b)
        raise ArityMismatch(f"unknown binary operator {expr.op!r}")
    raise ArityMismatch(f"not an expression node: {expr!r}")


def _pow(a, b):
    try:
        r = a ** b
    except ZeroDivisionError:
        raise DivisionByZero(f"zero raised to negative power {b!r}") from None
    except OverflowError:
        neg = a < 0 and float(b).is_integer() and int(b) % 2 == 1
        return -math.inf if neg else math.inf
    if isinstance(r, complex):
        raise DomainError(f"negative base {a!r} with non-integer exponent {b!r}")
    return r


def expression_arity(expr: Expression) -> tuple[int, int]:
    """Minimal (link arity, sum-variable arity) the expression requires."""
    links, sumvars = 0, 0
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, LinkRef):
            links = max(links, e.slot + 1)
        elif isinstance(e, SumVarRef):
            sumvars = max(sumvars, e.slot + 1)
        elif isinstance(e, Unary):
            stack.append(e.child)
        elif isinstance(e, Binary):
            stack.append(e.left)
            stack.append(e.right)
    return links, sumvars


def expression_params(expr: Expression) -> set[str]:
    """Names of all parameters the expression references."""
    out: set[str] = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Param):
            out.add(e.name)
        elif isinstance(e, Unary):
            stack.append(e.child)
        elif isinstance(e, Binary):
            stack.append(e.left)
            stack.append(e.right)
    return out


# --- parsing --------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
  | (?P<ws>\s+)
    """,
    re.VERBOSE,
)

_FUNCTIONS = {"exp": 1, "log": 1, "min": 2, "max": 2}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, link_names: Sequence[str], sumvar_names: Sequence[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.link_names = list(link_names)
        self.sumvar_names = list(sumvar_names)

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ExpressionSyntaxError("unexpected end of expression", len(self.text))
        self.pos += 1
        return tok

    def expect(self, value: str):
        tok = self.peek()
        if tok is None or tok[1] != value:
            at = tok[2] if tok else len(self.text)
            raise ExpressionSyntaxError(f"expected {value!r}", at)
        self.pos += 1

    def parse(self) -> Expression:
        expr = self.sum_expr()
        tok = self.peek()
        if tok is not None:
            raise ExpressionSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return expr

    def sum_expr(self) -> Expression:
        expr = self.term()
        while (tok := self.peek()) is not None and tok[1] in ("+", "-"):
            self.pos += 1
            rhs = self.term()
            expr = Binary("add" if tok[1] == "+" else "sub", expr, rhs)
        return expr

    def term(self) -> Expression:
        expr = self.unary()
        while (tok := self.peek()) is not None and tok[1] in ("*", "/"):
            self.pos += 1
            rhs = self.unary()
            expr = Binary("mul" if tok[1] == "*" else "div", expr, rhs)
        return expr

    def unary(self) -> Expression:
        tok = self.peek()
        if tok is not None and tok[1] == "-":
            self.pos += 1
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        tok = self.peek()
        if tok is not None and tok[1] == "^":
            self.pos += 1
            return Binary("pow", base, self.unary())
        return base

    def atom(self) -> Expression:
        kind, value, at = self.next()
        if kind == "number":
            return Const(float(value))
        if kind == "name":
            nxt = self.peek()
            if value in _FUNCTIONS and nxt is not None and nxt[1] == "(":
                return self.call(value)
            return self.identifier(value, at)
        if value == "(":
            expr = self.sum_expr()
            self.expect(")")
            return expr
        raise ExpressionSyntaxError(f"unexpected token {value!r}", at)

    def call(self, fn: str) -> Expression:
        self.expect("(")
        args = [self.sum_expr()]
        while (tok := self.peek()) is not None and tok[1] == ",":
            self.pos += 1
            args.append(self.sum_expr())
        self.expect(")")
        arity = _FUNCTIONS[fn]
        if len(args) != arity:
            raise ExpressionSyntaxError(
                f"{fn} takes {arity} argument{'s' if arity > 1 else ''}, got {len(args)}",
                self.tokens[self.pos - 1][2],
            )
        if arity == 1:
            return Unary(fn, args[0])
        return Binary(fn, args[0], args[1])

    def identifier(self, name: str, at: int) -> Expression:
        in_links = name in self.link_names
        in_sumvars = name in self.sumvar_names
        if in_links and in_sumvars:
            raise AmbiguousName(
                f"'{name}' names both a linked stock and a linked sum variable"
            )
        if in_links:
            return LinkRef(self.link_names.index(name))
        if in_sumvars:
            return SumVarRef(self.sumvar_names.index(name))
        return Param(name)


def parse_expression(
    text: str,
    link_names: Sequence[str] = (),
    sumvar_names: Sequence[str] = (),
) -> Expression:
    """Parse infix text into an expression AST.

    Identifiers resolve, in order, as: name of a linked stock (by slot),
    name of a linked sum variable (by slot), otherwise a free parameter.
    An identifier matching both a linked stock and a linked sum variable
    raises `AmbiguousName`.
    """
    return _Parser(text, link_names, sumvar_names).parse()


# --- formatting -----------------------------------------------------------

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5

_BIN_TEXT = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _prec(expr: Expression) -> int:
    if isinstance(expr, Const):
        return _PREC_ATOM if math.copysign(1.0, expr.value) > 0 else _PREC_NEG
    if isinstance(expr, (Param, LinkRef, SumVarRef)):
        return _PREC_ATOM
    if isinstance(expr, Unary):
        return _PREC_NEG if expr.op == "neg" else _PREC_ATOM
    if expr.op in ("add", "sub"):
        return _PREC_ADD
    if expr.op in ("mul", "div"):
        return _PREC_MUL
    if expr.op == "pow":
        return _PREC_POW
    return _PREC_ATOM  # min/max render as calls


def format_expression(
    expr: Expression,
    link_names: Sequence[str] = (),
    sumvar_names: Sequence[str] = (),
) -> str:
    """Render an expression as infix text; inverse of `parse_expression`.

    Slot references render as the corresponding link-source names.  A
    constant with a negative sign bit renders as negation of its absolute
    value, so it reparses as `Unary("neg", Const(abs))`.
    """

    def fmt(e: Expression, required: int) -> str:
        text = _fmt(e)
        if _prec(e) < required:
            return f"({text})"
        return text

    def _fmt(e: Expression) -> str:
        if isinstance(e, Const):
            if math.copysign(1.0, e.value) < 0:
                return "-" + fmt(Const(-e.value), _PREC_NEG)
            return repr(e.value)
        if isinstance(e, Param):
            return e.name
        if isinstance(e, LinkRef):
            if not 0 <= e.slot < len(link_names):
                raise ArityMismatch(f"link slot {e.slot} has no name (arity {len(link_names)})")
            return link_names[e.slot]
        if isinstance(e, SumVarRef):
            if not 0 <= e.slot < len(sumvar_names):
                raise ArityMismatch(
                    f"sum-variable slot {e.slot} has no name (arity {len(sumvar_names)})"
                )
            return sumvar_names[e.slot]
        if isinstance(e, Unary):
            if e.op == "neg":
                return "-" + fmt(e.child, _PREC_NEG)
            return f"{e.op}({fmt(e.child, 0)})"
        if isinstance(e, Binary):
            if e.op in ("min", "max"):
                return f"{e.op}({fmt(e.left, 0)}, {fmt(e.right, 0)})"
            if e.op == "pow":
                return f"{fmt(e.left, _PREC_ATOM)}^{fmt(e.right, _PREC_NEG)}"
            op_prec = _PREC_ADD if e.op in ("add", "sub") else _PREC_MUL
            return (
                f"{fmt(e.left, op_prec)} {_BIN_TEXT[e.op]} {fmt(e.right, op_prec + 1)}"
            )
        raise ArityMismatch(f"not an expression node: {e!r}")

    return _fmt(expr)
