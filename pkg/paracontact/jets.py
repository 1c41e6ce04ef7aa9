"""Second-order forward-mode automatic differentiation.

A :class:`Jet2` is the truncated Taylor expansion of a scalar function of ``m``
real variables at a point: value, gradient and Hessian. The Hessian is held as
its packed upper triangle, so an asymmetric Hessian cannot be represented.

    >>> x = jet_var(2.0, 0, 1)
    >>> y = jet_mul(x, x)
    >>> y.value, y.grad.tolist(), y.hess.tolist()
    (4.0, [4.0], [[2.0]])
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import JetDomainError, JetError


@lru_cache(maxsize=None)
def _triu(m: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(m)


def _pack(mat: np.ndarray) -> np.ndarray:
    return mat[_triu(mat.shape[0])]


def _sym_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Packed a⊗b + b⊗a."""
    full = np.outer(a, b)
    return _pack(full + full.T)


@dataclass(frozen=True, eq=False)
class Jet2:
    value: float
    grad: np.ndarray
    hess_packed: np.ndarray

    @property
    def m(self) -> int:
        return self.grad.shape[0]

    @property
    def hess(self) -> np.ndarray:
        m = self.m
        iu = _triu(m)
        out = np.zeros((m, m))
        out[iu] = self.hess_packed
        out.T[iu] = self.hess_packed
        return out

    @classmethod
    def constant(cls, value: float, m: int) -> Jet2:
        size = m * (m + 1) // 2
        return cls(float(value), np.zeros(m), np.zeros(size))

    def is_constant(self) -> bool:
        return not (self.grad.any() or self.hess_packed.any())

    # Operator sugar so expression evaluation reads naturally.
    def __add__(self, other: Jet2) -> Jet2:
        return jet_add(self, other)

    def __sub__(self, other: Jet2) -> Jet2:
        return jet_add(self, jet_neg(other))

    def __mul__(self, other: Jet2) -> Jet2:
        return jet_mul(self, other)

    def __truediv__(self, other: Jet2) -> Jet2:
        return jet_div(self, other)

    def __neg__(self) -> Jet2:
        return jet_neg(self)

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, grad={self.grad.tolist()!r}, hess={self.hess.tolist()!r})"


def jet_var(value: float, index: int, m: int) -> Jet2:
    """Seed the ``index``-th coordinate function at ``value``."""
    if not 0 <= index < m:
        raise JetError(f"seed index {index} out of range for m={m}")
    grad = np.zeros(m)
    grad[index] = 1.0
    return Jet2(float(value), grad, np.zeros(m * (m + 1) // 2))


def _check_same(a: Jet2, b: Jet2) -> None:
    if a.m != b.m:
        raise JetError(f"cannot combine jets of dimension {a.m} and {b.m}")


def jet_add(a: Jet2, b: Jet2) -> Jet2:
    _check_same(a, b)
    return Jet2(a.value + b.value, a.grad + b.grad, a.hess_packed + b.hess_packed)


def jet_neg(a: Jet2) -> Jet2:
    return Jet2(-a.value, -a.grad, -a.hess_packed)


def jet_mul(a: Jet2, b: Jet2) -> Jet2:
    _check_same(a, b)
    if a.is_constant():
        return _scale(b, a.value, a.value * b.value)
    if b.is_constant():
        return _scale(a, b.value, a.value * b.value)
    grad = a.value * b.grad + b.value * a.grad
    hess = a.value * b.hess_packed + b.value * a.hess_packed + _sym_outer(a.grad, b.grad)
    return Jet2(a.value * b.value, grad, hess)


def _scale(a: Jet2, c: float, value: float) -> Jet2:
    return Jet2(value, c * a.grad, c * a.hess_packed)


def jet_div(a: Jet2, b: Jet2) -> Jet2:
    _check_same(a, b)
    if b.value == 0.0:
        raise JetDomainError("division by a jet with zero value")
    q = a.value / b.value
    if b.is_constant():
        return Jet2(q, a.grad / b.value, a.hess_packed / b.value)
    dq = (a.grad - q * b.grad) / b.value
    hess = (a.hess_packed - q * b.hess_packed - _sym_outer(dq, b.grad)) / b.value
    return Jet2(q, dq, hess)


# ──────────────────────────────────────────────────────────────────
# Elementary functions
# ──────────────────────────────────────────────────────────────────


def _sinh(x: float) -> tuple[float, float, float]:
    s = math.sinh(x)
    return s, math.cosh(x), s


def _cosh(x: float) -> tuple[float, float, float]:
    c = math.cosh(x)
    return c, math.sinh(x), c


def _tanh(x: float) -> tuple[float, float, float]:
    t = math.tanh(x)
    d = 1.0 - t * t
    return t, d, -2.0 * t * d


def _exp(x: float) -> tuple[float, float, float]:
    e = math.exp(x)
    return e, e, e


def _ln(x: float) -> tuple[float, float, float]:
    if x <= 0.0:
        raise JetDomainError(f"ln of non-positive value {x!r}")
    return math.log(x), 1.0 / x, -1.0 / (x * x)


def _sin(x: float) -> tuple[float, float, float]:
    s = math.sin(x)
    return s, math.cos(x), -s


def _cos(x: float) -> tuple[float, float, float]:
    c = math.cos(x)
    return c, -math.sin(x), -c


def _sqrt(x: float) -> tuple[float, float, float]:
    if x <= 0.0:
        raise JetDomainError(f"sqrt of non-positive value {x!r}")
    r = math.sqrt(x)
    return r, 0.5 / r, -0.25 / (r * x)


UNARY_FUNCTIONS = {
    "sinh": _sinh,
    "cosh": _cosh,
    "tanh": _tanh,
    "exp": _exp,
    "ln": _ln,
    "sin": _sin,
    "cos": _cos,
    "sqrt": _sqrt,
}


def pow_derivatives(x: float, c: Fraction | float) -> tuple[float, float, float]:
    """x^c and its first two derivatives for a literal exponent ``c``."""
    if float(c).is_integer():
        k = int(c)
        if k == 0:
            return 1.0, 0.0, 0.0
        if k < 0 and x == 0.0:
            raise JetDomainError(f"0 raised to negative power {k}")
        d1 = 1.0 if k == 1 else k * x ** (k - 1)
        # k in (1, 2): constant second derivative, and 0.0 ** -1 would raise
        d2 = float(k * (k - 1)) if k in (1, 2) else k * (k - 1) * x ** (k - 2)
        return float(x**k), float(d1), float(d2)
    if x <= 0.0:
        raise JetDomainError(f"non-integer power {c} of non-positive value {x!r}")
    cf = float(c)
    return x**cf, cf * x ** (cf - 1.0), cf * (cf - 1.0) * x ** (cf - 2.0)


def jet_apply(a: Jet2, derivs: tuple[float, float, float]) -> Jet2:
    """Chain rule to second order given g(a), g'(a), g''(a)."""
    g, d1, d2 = derivs
    grad = d1 * a.grad
    hess = d1 * a.hess_packed + d2 * _pack(np.outer(a.grad, a.grad))
    return Jet2(g, grad, hess)


def jet_unary(fn: str, a: Jet2, exponent: Fraction | float | None = None) -> Jet2:
    """Apply ``fn`` (a key of UNARY_FUNCTIONS, or ``"pow_const"``) to a jet."""
    if fn == "pow_const":
        if exponent is None:
            raise JetError("pow_const needs a literal exponent")
        return jet_apply(a, pow_derivatives(a.value, exponent))
    try:
        rule = UNARY_FUNCTIONS[fn]
    except KeyError:
        raise JetError(f"unsupported unary function {fn!r}")
    return jet_apply(a, rule(a.value))
