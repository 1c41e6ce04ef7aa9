"""The immersion DSL: tokenizer, parser, printer, evaluators, symbolic d/dx.

Grammar (highest binding last)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := atom ('^' exponent)?
    exponent := ['-'] NUMBER ['^' exponent] | '(' ['-'] NUMBER ['/' NUMBER] ')'
    atom     := NUMBER | IDENT | IDENT '(' args ')' | '(' expr ')'

Exponents are literals, so ``x ^ y`` is rejected. ``integral(g, y)`` and
calls of declared tables are generated-only forms: they are accepted inside
immersion files (which the ``family`` and ``gauge`` commands write) but not
by :func:`parse_expr` unless ``generated=True``.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Union

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import ExprSyntaxError, JetDomainError, SpecFormatError
from .jets import (
    UNARY_FUNCTIONS,
    Jet2,
    jet_add,
    jet_apply,
    jet_div,
    jet_mul,
    jet_neg,
    jet_unary,
    jet_var,
    pow_derivatives,
)

logger = logging.getLogger(__name__)

RESERVED = frozenset(UNARY_FUNCTIONS) | {"integral", "table", "n", "vars", "domain"}

# ──────────────────────────────────────────────────────────────────
# Tree
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg:
    operand: Expr


@dataclass(frozen=True)
class Pow:
    base: Expr
    exponent: Fraction


@dataclass(frozen=True)
class Call:
    fn: str
    arg: Expr


@dataclass(frozen=True)
class Integral:
    """Antiderivative of a one-variable integrand, zero at ``origin``."""

    integrand: Expr
    var: Var
    origin: float = 0.0


@dataclass(frozen=True)
class SampledTable:
    """Uniformly sampled function on [lo, hi], interpolated by a cubic spline."""

    name: str
    lo: float
    hi: float
    values: tuple[float, ...]
    order: int = 0

    def __post_init__(self) -> None:
        if len(self.values) < 4:
            raise SpecFormatError(f"table {self.name} needs at least 4 samples")
        if not self.hi > self.lo:
            raise SpecFormatError(f"table {self.name} has an empty interval")

    @cached_property
    def knots(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, len(self.values))

    @cached_property
    def spline(self) -> CubicSpline:
        return CubicSpline(self.knots, np.asarray(self.values))

    @property
    def label(self) -> str:
        return self.name if self.order == 0 else f"{self.name}_d{self.order}"

    def derivative(self) -> SampledTable:
        return replace(self, order=self.order + 1)

    def derivatives(self, x: float) -> tuple[float, float, float]:
        s = self.spline
        k = self.order
        return float(s(x, k)), float(s(x, k + 1)), float(s(x, k + 2))


@dataclass(frozen=True)
class TableCall:
    table: SampledTable
    arg: Expr


Expr = Union[Num, Var, BinOp, Neg, Pow, Call, Integral, TableCall]


# ──────────────────────────────────────────────────────────────────
# Tokenizer
# ──────────────────────────────────────────────────────────────────

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number | ident | op | end
    text: str
    line: int
    column: int


def tokenize(text: str, line: int = 1, column: int = 1) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    cur_line, line_start = line, -(column - 1)
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", cur_line, col)
        kind = m.lastgroup
        if kind == "ws":
            chunk = m.group()
            if "\n" in chunk:
                cur_line += chunk.count("\n")
                line_start = pos + chunk.rindex("\n") + 1
        else:
            tokens.append(Token(kind, m.group(), cur_line, col))
        pos = m.end()
    tokens.append(Token("end", "", cur_line, pos - line_start + 1))
    return tokens


# ──────────────────────────────────────────────────────────────────
# Parser
# ──────────────────────────────────────────────────────────────────


class _Parser:
    def __init__(
        self,
        tokens: list[Token],
        variables: dict[str, int],
        tables: dict[str, SampledTable],
        generated: bool,
    ) -> None:
        self.tokens = tokens
        self.pos = 0
        self.variables = variables
        self.tables = tables
        self.generated = generated

    # ── token helpers ────────────────────────────────────────
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            if text == ")":
                raise self.error("unbalanced parentheses: expected ')'")
            raise self.error(f"expected {text!r}")
        return self.advance()

    def error(self, message: str, tok: Token | None = None) -> ExprSyntaxError:
        t = tok or self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        return ExprSyntaxError(f"{message}, found {found}", t.line, t.column)

    # ── grammar ──────────────────────────────────────────────
    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            if self.at(")"):
                raise self.error("unbalanced parentheses: unexpected ')'")
            raise self.error("unexpected token")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.at("-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.at("^"):
            self.advance()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> Fraction:
        start = self.tok
        if self.at("("):
            self.advance()
            value = self.signed_number(start)
            if self.at("/"):
                self.advance()
                denom = self.signed_number(start, allow_sign=False)
                if denom == 0:
                    raise self.error("zero denominator in exponent", start)
                value = value / denom
            self.expect(")")
        else:
            value = self.signed_number(start)
        if self.at("^"):
            self.advance()
            outer = self.exponent()
            if outer.denominator != 1:
                raise self.error("chained exponent must be an integer", start)
            value = value ** int(outer)
        return value

    def signed_number(self, start: Token, allow_sign: bool = True) -> Fraction:
        negative = False
        if allow_sign and self.at("-"):
            self.advance()
            negative = True
        if self.tok.kind != "number":
            raise self.error("non-literal exponent", start)
        value = Fraction(self.advance().text)
        return -value if negative else value

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.advance()
            return Num(float(t.text))
        if t.kind == "ident":
            self.advance()
            if self.at("("):
                return self.call(t)
            if t.text in self.variables:
                return Var(t.text, self.variables[t.text])
            raise ExprSyntaxError(f"unknown identifier {t.text!r}", t.line, t.column)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise self.error("expected a number, variable, function call or '('")

    def call(self, name: Token) -> Expr:
        fn = name.text
        self.expect("(")
        if fn in UNARY_FUNCTIONS:
            arg = self.expr()
            self.expect(")")
            return Call(fn, arg)
        table = self.table(fn) if self.generated else None
        if table is not None:
            arg = self.expr()
            self.expect(")")
            return TableCall(table, arg)
        if self.generated and fn == "integral":
            return self.integral(name)
        raise ExprSyntaxError(f"unknown identifier {fn!r}", name.line, name.column)

    def table(self, fn: str) -> SampledTable | None:
        """A declared table, or <name>_d<k> for its k-th derivative."""
        if fn in self.tables:
            return self.tables[fn]
        match = _TABLE_DERIVATIVE_RE.match(fn)
        if match and match.group(1) in self.tables:
            return replace(self.tables[match.group(1)], order=int(match.group(2)))
        return None

    def integral(self, name: Token) -> Expr:
        integrand = self.expr()
        self.expect(",")
        vt = self.tok
        if vt.kind != "ident" or vt.text not in self.variables:
            raise self.error("integral needs a declared variable of integration")
        self.advance()
        var = Var(vt.text, self.variables[vt.text])
        origin = 0.0
        if self.at(","):
            self.advance()
            origin = float(self.signed_number(vt))
        self.expect(")")
        stray = {v.name for v in variables(integrand)} - {var.name}
        if stray:
            raise ExprSyntaxError(
                f"integrand may only depend on {var.name}, also uses {sorted(stray)}",
                name.line,
                name.column,
            )
        return Integral(integrand, var, origin)


def parse_expr(
    text: str,
    vars: tuple[str, ...] | list[str],
    *,
    line: int = 1,
    column: int = 1,
    tables: dict[str, SampledTable] | None = None,
    generated: bool = False,
) -> Expr:
    """Parse ``text`` over the declared variables ``vars``."""
    variables = {name: i for i, name in enumerate(vars)}
    tokens = tokenize(text, line, column)
    return _Parser(tokens, variables, dict(tables or {}), generated).parse()


# ──────────────────────────────────────────────────────────────────
# Printer
# ──────────────────────────────────────────────────────────────────

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    return 5


def format_number(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def _format_fraction(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator) if c >= 0 else f"({c.numerator})"
    return f"({c.numerator}/{c.denominator})"


def format_expr(e: Expr) -> str:
    """Minimal-parenthesis rendering that re-parses to an identical tree."""
    if isinstance(e, Num):
        return format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left = format_expr(e.left)
        if _prec(e.left) < p:
            left = f"({left})"
        right = format_expr(e.right)
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    if isinstance(e, Neg):
        inner = format_expr(e.operand)
        if _prec(e.operand) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = format_expr(e.base)
        if _prec(e.base) < 5:
            base = f"({base})"
        return f"{base}^{_format_fraction(e.exponent)}"
    if isinstance(e, Call):
        return f"{e.fn}({format_expr(e.arg)})"
    if isinstance(e, Integral):
        origin = f", {format_number(e.origin)}" if e.origin else ""
        return f"integral({format_expr(e.integrand)}, {e.var.name}{origin})"
    if isinstance(e, TableCall):
        return f"{e.table.label}({format_expr(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


# ──────────────────────────────────────────────────────────────────
# Tree queries
# ──────────────────────────────────────────────────────────────────


def _children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, (Neg,)):
        return (e.operand,)
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, (Call, TableCall)):
        return (e.arg,)
    if isinstance(e, Integral):
        return (e.integrand, e.var)
    return ()


def walk(e: Expr):
    yield e
    for child in _children(e):
        yield from walk(child)


def variables(e: Expr) -> set[Var]:
    return {node for node in walk(e) if isinstance(node, Var)}


def tables_in(e: Expr) -> list[SampledTable]:
    return [node.table for node in walk(e) if isinstance(node, TableCall)]


# ──────────────────────────────────────────────────────────────────
# Evaluation
# ──────────────────────────────────────────────────────────────────


def _seeds(point) -> list[Jet2]:
    m = len(point)
    return [jet_var(float(x), i, m) for i, x in enumerate(point)]


def _eval(e: Expr, seeds: list[Jet2], point) -> Jet2:
    if isinstance(e, Num):
        return Jet2.constant(e.value, len(seeds))
    if isinstance(e, Var):
        return seeds[e.index]
    if isinstance(e, BinOp):
        a = _eval(e.left, seeds, point)
        b = _eval(e.right, seeds, point)
        if e.op == "+":
            return jet_add(a, b)
        if e.op == "-":
            return jet_add(a, jet_neg(b))
        if e.op == "*":
            return jet_mul(a, b)
        return jet_div(a, b)
    if isinstance(e, Neg):
        return jet_neg(_eval(e.operand, seeds, point))
    if isinstance(e, Pow):
        return jet_unary("pow_const", _eval(e.base, seeds, point), e.exponent)
    if isinstance(e, Call):
        return jet_unary(e.fn, _eval(e.arg, seeds, point))
    if isinstance(e, TableCall):
        a = _eval(e.arg, seeds, point)
        return jet_apply(a, e.table.derivatives(a.value))
    if isinstance(e, Integral):
        g = _eval(e.integrand, seeds, point)
        y = seeds[e.var.index]
        q = _integrate(e, point)
        return jet_apply(y, (q, g.value, float(g.grad[e.var.index])))
    raise TypeError(f"not an expression node: {e!r}")


def _integrate(e: Integral, point) -> float:
    base = [float(x) for x in point]
    idx = e.var.index

    def integrand(t: float) -> float:
        base[idx] = t
        return _eval_float(e.integrand, base)

    upper = float(point[idx])
    value, _ = quad(integrand, e.origin, upper, epsabs=1e-13, epsrel=1e-13, limit=200)
    return value


def eval_component(e: Expr, point) -> Jet2:
    """Value, gradient and Hessian of ``e`` at ``point``."""
    return _eval(e, _seeds(point), point)


def eval_components(exprs, point) -> list[Jet2]:
    seeds = _seeds(point)
    return [_eval(e, seeds, point) for e in exprs]


def _eval_float(e: Expr, point) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(point[e.index])
    if isinstance(e, BinOp):
        a = _eval_float(e.left, point)
        b = _eval_float(e.right, point)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0.0:
            raise JetDomainError("division by zero")
        return a / b
    if isinstance(e, Neg):
        return -_eval_float(e.operand, point)
    if isinstance(e, Pow):
        return pow_derivatives(_eval_float(e.base, point), e.exponent)[0]
    if isinstance(e, Call):
        return UNARY_FUNCTIONS[e.fn](_eval_float(e.arg, point))[0]
    if isinstance(e, TableCall):
        return e.table.derivatives(_eval_float(e.arg, point))[0]
    if isinstance(e, Integral):
        return _integrate(e, point)
    raise TypeError(f"not an expression node: {e!r}")


def eval_scalar(e: Expr, point) -> float:
    """Plain float evaluation (no derivatives)."""
    return _eval_float(e, point)


# ──────────────────────────────────────────────────────────────────
# Simplifying constructors and symbolic differentiation
# ──────────────────────────────────────────────────────────────────

ZERO = Num(0.0)
ONE = Num(1.0)


def const(v: float) -> Expr:
    """Literal for ``v``; negatives become Neg(Num) so they print and re-parse."""
    v = float(v)
    if v < 0:
        return Neg(Num(-v))
    return Num(v + 0.0)


def const_value(e: Expr) -> float | None:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Neg) and isinstance(e.operand, Num):
        return -e.operand.value
    return None


def add(a: Expr, b: Expr) -> Expr:
    ca, cb = const_value(a), const_value(b)
    if ca is not None and cb is not None:
        return const(ca + cb)
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    if isinstance(b, Neg):
        return sub(a, b.operand)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    ca, cb = const_value(a), const_value(b)
    if ca is not None and cb is not None:
        return const(ca - cb)
    if cb == 0.0:
        return a
    if ca == 0.0:
        return neg(b)
    if a == b:
        return ZERO
    if isinstance(b, Neg):
        return BinOp("+", a, b.operand)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    ca, cb = const_value(a), const_value(b)
    if ca is not None and cb is not None:
        return const(ca * cb)
    if ca == 0.0 or cb == 0.0:
        return ZERO
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    if ca == -1.0:
        return neg(b)
    if cb == -1.0:
        return neg(a)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    ca, cb = const_value(a), const_value(b)
    if cb == 0.0:
        raise JetDomainError("symbolic division by zero")
    if ca is not None and cb is not None:
        return const(ca / cb)
    if ca == 0.0:
        return ZERO
    if cb == 1.0:
        return a
    return BinOp("/", a, b)


def neg(a: Expr) -> Expr:
    ca = const_value(a)
    if ca is not None:
        return const(-ca)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def power(base: Expr, c: Fraction) -> Expr:
    c = Fraction(c)
    if c == 0:
        return ONE
    if c == 1:
        return base
    cb = const_value(base)
    if cb is not None:
        return const(pow_derivatives(cb, c)[0])
    return Pow(base, c)


def call(fn: str, arg: Expr) -> Expr:
    ca = const_value(arg)
    if ca is not None:
        return const(UNARY_FUNCTIONS[fn](ca)[0])
    return Call(fn, arg)


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Replace variables by name; used to re-home one-variable profiles."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.arg, mapping))
    if isinstance(e, TableCall):
        return TableCall(e.table, substitute(e.arg, mapping))
    if isinstance(e, Integral):
        var = mapping.get(e.var.name, e.var)
        if not isinstance(var, Var):
            raise TypeError("integration variable can only be renamed")
        return Integral(substitute(e.integrand, mapping), var, e.origin)
    return e


def simplify(e: Expr) -> Expr:
    if isinstance(e, BinOp):
        a, b = simplify(e.left), simplify(e.right)
        return {"+": add, "-": sub, "*": mul, "/": div}[e.op](a, b)
    if isinstance(e, Neg):
        return neg(simplify(e.operand))
    if isinstance(e, Pow):
        return power(simplify(e.base), e.exponent)
    if isinstance(e, Call):
        return call(e.fn, simplify(e.arg))
    if isinstance(e, TableCall):
        return TableCall(e.table, simplify(e.arg))
    if isinstance(e, Integral):
        return Integral(simplify(e.integrand), e.var, e.origin)
    return e


def differentiate(e: Expr, var: str) -> Expr:
    """Symbolic ∂e/∂var, simplified as it is built."""
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, BinOp):
        da, db = differentiate(e.left, var), differentiate(e.right, var)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, e.right), mul(e.left, db))
        numer = sub(mul(da, e.right), mul(e.left, db))
        return div(numer, power(e.right, Fraction(2)))
    if isinstance(e, Neg):
        return neg(differentiate(e.operand, var))
    if isinstance(e, Pow):
        c = e.exponent
        outer = mul(const(float(c)), power(e.base, c - 1))
        return mul(outer, differentiate(e.base, var))
    if isinstance(e, Call):
        du = differentiate(e.arg, var)
        if const_value(du) == 0.0:
            return ZERO
        return mul(_outer_derivative(e.fn, e.arg), du)
    if isinstance(e, TableCall):
        du = differentiate(e.arg, var)
        if const_value(du) == 0.0:
            return ZERO
        return mul(TableCall(e.table.derivative(), e.arg), du)
    if isinstance(e, Integral):
        return e.integrand if e.var.name == var else ZERO
    raise TypeError(f"not an expression node: {e!r}")


def _outer_derivative(fn: str, u: Expr) -> Expr:
    if fn == "sinh":
        return call("cosh", u)
    if fn == "cosh":
        return call("sinh", u)
    if fn == "tanh":
        return sub(ONE, power(call("tanh", u), Fraction(2)))
    if fn == "exp":
        return call("exp", u)
    if fn == "ln":
        return div(ONE, u)
    if fn == "sin":
        return call("cos", u)
    if fn == "cos":
        return neg(call("sin", u))
    if fn == "sqrt":
        return div(ONE, mul(Num(2.0), call("sqrt", u)))
    raise TypeError(f"no derivative rule for {fn!r}")


# ──────────────────────────────────────────────────────────────────
# Immersion files
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ImmersionSpec:
    """f: M → R^{2n+2} and a transversal field C, both as expressions."""

    n: int
    var_names: tuple[str, ...]
    f_components: tuple[Expr, ...]
    c_components: tuple[Expr, ...]
    domain_box: tuple[tuple[float, float], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        m, dim = 2 * self.n + 1, 2 * self.n + 2
        if len(self.var_names) != m or len(self.domain_box) != m:
            raise SpecFormatError(f"expected {m} variables for n={self.n}")
        if len(self.f_components) != dim:
            raise SpecFormatError(
                f"expected {dim} f components, got {len(self.f_components)}"
            )
        if len(self.c_components) != dim:
            raise SpecFormatError(
                f"expected {dim} C components, got {len(self.c_components)}"
            )

    @property
    def m(self) -> int:
        return 2 * self.n + 1

    @property
    def dim(self) -> int:
        return 2 * self.n + 2

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.domain_box])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.domain_box])

    def contains(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower) and np.all(u <= self.upper))

    def center(self) -> np.ndarray:
        return (self.lower + self.upper) / 2.0


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*$")
_ASSIGN_RE = re.compile(r"\s*([fC])(\d+)\s*=(.*)$")
_TABLE_DERIVATIVE_RE = re.compile(r"([A-Za-z_][A-Za-z_0-9]*)_d([1-9]\d*)$")


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].rstrip()


def _parse_interval(text: str, lineno: int) -> tuple[float, float]:
    lo_s, sep, hi_s = text.partition(":")
    try:
        lo, hi = float(lo_s), float(hi_s)
    except ValueError:
        sep = ""
    if not sep:
        raise SpecFormatError(f"bad interval {text!r}, expected lo:hi", lineno)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise SpecFormatError(f"interval {text!r} must be finite with lo < hi", lineno)
    return lo, hi


def parse_immersion(text: str, name: str = "") -> ImmersionSpec:
    """Parse the line-based immersion format (see docs/internals.md)."""
    lines = [
        (i, _strip_comment(raw))
        for i, raw in enumerate(text.splitlines(), start=1)
        if _strip_comment(raw).strip()
    ]
    if not lines:
        raise SpecFormatError("missing header: expected 'n <integer>'")

    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 2 or parts[0] != "n" or not parts[1].isdigit():
        raise SpecFormatError("missing header: expected 'n <integer>'", lineno)
    n = int(parts[1])
    if n < 1:
        raise SpecFormatError("n must be >= 1", lineno)
    m, dim = 2 * n + 1, 2 * n + 2

    if len(lines) < 2 or lines[1][1].split()[0] != "vars":
        raise SpecFormatError("expected 'vars' line after header", lines[0][0] + 1)
    lineno, vline = lines[1]
    var_names = tuple(vline.split()[1:])
    if len(var_names) != m:
        raise SpecFormatError(f"expected {m} variables, got {len(var_names)}", lineno)
    for v in var_names:
        if not _IDENT_RE.match(v) or v in RESERVED:
            raise SpecFormatError(f"invalid variable name {v!r}", lineno)
    if len(set(var_names)) != m:
        raise SpecFormatError("duplicate variable names", lineno)

    if len(lines) < 3 or lines[2][1].split()[0] != "domain":
        raise SpecFormatError("expected 'domain' line after vars", lineno + 1)
    lineno, dline = lines[2]
    intervals = dline.split()[1:]
    if len(intervals) != m:
        raise SpecFormatError(f"expected {m} domain intervals, got {len(intervals)}", lineno)
    domain = tuple(_parse_interval(t, lineno) for t in intervals)

    tables: dict[str, SampledTable] = {}
    assignments: list[tuple[int, str, int, str, int]] = []
    for lineno, body in lines[3:]:
        head = body.split(None, 1)[0]
        if head == "table":
            table = _parse_table(body, lineno)
            if table.name in tables or table.name in var_names or table.name in RESERVED:
                raise SpecFormatError(f"duplicate or reserved table name {table.name!r}", lineno)
            tables[table.name] = table
            continue
        match = _ASSIGN_RE.match(body)
        if not match:
            raise SpecFormatError(f"cannot parse line {body.strip()!r}", lineno)
        kind, idx, expr_text = match.group(1), int(match.group(2)), match.group(3)
        assignments.append((lineno, kind, idx, expr_text, match.start(3) + 1))

    found: dict[tuple[str, int], Expr] = {}
    for lineno, kind, idx, expr_text, col in assignments:
        if not 1 <= idx <= dim:
            raise SpecFormatError(f"{kind}{idx}: index out of range 1..{dim}", lineno)
        if (kind, idx) in found:
            raise SpecFormatError(f"duplicate key {kind}{idx}", lineno)
        found[(kind, idx)] = parse_expr(
            expr_text, var_names, line=lineno, column=col, tables=tables, generated=True
        )

    f_keys = sorted(i for k, i in found if k == "f")
    c_keys = sorted(i for k, i in found if k == "C")
    if len(f_keys) != dim:
        raise SpecFormatError(f"expected {dim} f components, got {len(f_keys)}")
    if not c_keys:
        raise SpecFormatError("transversal field required: no C components given")
    if len(c_keys) != dim:
        raise SpecFormatError(f"expected {dim} C components, got {len(c_keys)}")

    return ImmersionSpec(
        n=n,
        var_names=var_names,
        f_components=tuple(found[("f", i)] for i in range(1, dim + 1)),
        c_components=tuple(found[("C", i)] for i in range(1, dim + 1)),
        domain_box=domain,
        name=name,
    )


def _parse_table(body: str, lineno: int) -> SampledTable:
    parts = body.split()
    if len(parts) < 7:
        raise SpecFormatError("table needs a name, an interval and at least 4 samples", lineno)
    name = parts[1]
    if not _IDENT_RE.match(name):
        raise SpecFormatError(f"invalid table name {name!r}", lineno)
    lo, hi = _parse_interval(parts[2], lineno)
    try:
        values = tuple(float(v) for v in parts[3:])
    except ValueError:
        raise SpecFormatError(f"table {name}: samples must be numbers", lineno)
    return SampledTable(name, lo, hi, values)


def format_immersion(spec: ImmersionSpec) -> str:
    """Serialize back to the file format; tables first, then f, then C."""
    out = [
        f"n {spec.n}",
        "vars " + " ".join(spec.var_names),
        "domain " + " ".join(f"{format_number(lo)}:{format_number(hi)}" for lo, hi in spec.domain_box),
    ]
    # derivative tables are written as their base samples and referenced as <name>_d<k>
    seen: dict[str, SampledTable] = {}
    for e in spec.f_components + spec.c_components:
        for t in tables_in(e):
            seen.setdefault(t.name, replace(t, order=0))
    for name, t in seen.items():
        samples = " ".join(repr(float(v)) for v in t.values)
        out.append(f"table {name} {format_number(t.lo)}:{format_number(t.hi)} {samples}")
    out += [f"f{i} = {format_expr(e)}" for i, e in enumerate(spec.f_components, start=1)]
    out += [f"C{i} = {format_expr(e)}" for i, e in enumerate(spec.c_components, start=1)]
    return "\n".join(out) + "\n"
