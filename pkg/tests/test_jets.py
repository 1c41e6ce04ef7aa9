"""Tests for second-order jets, checked against finite differences."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from paracontact.errors import JetDomainError, JetError
from paracontact.exprlang import (
    BinOp,
    Call,
    Num,
    Pow,
    Var,
    eval_component,
    eval_scalar,
)
from paracontact.jets import (
    Jet2,
    jet_div,
    jet_mul,
    jet_unary,
    jet_var,
    pow_derivatives,
)

SAFE_FUNCTIONS = ("sinh", "cosh", "tanh", "exp", "sin", "cos")


def random_expr(rng: np.random.Generator, depth: int, m: int):
    """Smooth expressions with no domain restrictions on the unit box."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.7:
            i = int(rng.integers(m))
            return Var(f"v{i}", i)
        return Num(float(rng.choice([0.5, 1.0, 2.0, 3.25])))
    kind = rng.choice(["+", "-", "*", "/", "call", "pow"])
    if kind == "call":
        return Call(str(rng.choice(SAFE_FUNCTIONS)), random_expr(rng, depth - 1, m))
    if kind == "pow":
        return Pow(random_expr(rng, depth - 1, m), Fraction(int(rng.integers(2, 4))))
    left = random_expr(rng, depth - 1, m)
    right = random_expr(rng, depth - 1, m)
    if kind == "/":
        # denominator 2 + r^2 stays away from zero
        right = BinOp("+", Num(2.0), Pow(right, Fraction(2)))
    return BinOp(str(kind), left, right)


def richardson(fn, u, i, h=1e-3):
    step = np.zeros(u.size)
    step[i] = h
    wide = (fn(u + step) - fn(u - step)) / (2 * h)
    narrow = (fn(u + step / 2) - fn(u - step / 2)) / h
    return (4 * narrow - wide) / 3


def fd_gradient(e, u):
    return np.array([richardson(lambda p: eval_scalar(e, p), u, i) for i in range(u.size)])


def fd_hessian(e, u):
    cols = [richardson(lambda p: eval_component(e, p).grad, u, i) for i in range(u.size)]
    return np.column_stack(cols)


class TestJetArithmetic:
    def test_square(self):
        x = jet_var(2.0, 0, 1)
        y = jet_mul(x, x)
        assert y.value == 4.0
        assert y.grad.tolist() == [4.0]
        assert y.hess.tolist() == [[2.0]]

    def test_product_of_two_variables(self):
        x, y = jet_var(3.0, 0, 2), jet_var(5.0, 1, 2)
        z = x * y
        assert z.value == 15.0
        assert z.grad.tolist() == [5.0, 3.0]
        assert z.hess.tolist() == [[0.0, 1.0], [1.0, 0.0]]

    def test_hessian_is_symmetric(self):
        x, y = jet_var(0.3, 0, 2), jet_var(-0.7, 1, 2)
        z = jet_unary("sinh", x * y * y)
        assert np.array_equal(z.hess, z.hess.T)

    def test_quotient(self):
        x = jet_var(2.0, 0, 1)
        q = jet_div(Jet2.constant(1.0, 1), x)
        assert q.value == pytest.approx(0.5)
        assert q.grad[0] == pytest.approx(-0.25)
        assert q.hess[0, 0] == pytest.approx(0.25)

    def test_constant(self):
        c = Jet2.constant(7.0, 3)
        assert c.is_constant()
        assert c.hess.shape == (3, 3)

    def test_dimension_mismatch(self):
        with pytest.raises(JetError):
            jet_var(1.0, 0, 1) + jet_var(1.0, 0, 2)

    def test_seed_index_out_of_range(self):
        with pytest.raises(JetError):
            jet_var(1.0, 2, 2)

    def test_unknown_function(self):
        with pytest.raises(JetError):
            jet_unary("erf", jet_var(1.0, 0, 1))


class TestDomains:
    def test_ln_of_negative(self):
        with pytest.raises(JetDomainError):
            jet_unary("ln", jet_var(-1.0, 0, 1))

    def test_sqrt_of_zero(self):
        with pytest.raises(JetDomainError):
            jet_unary("sqrt", jet_var(0.0, 0, 1))

    def test_division_by_zero(self):
        with pytest.raises(JetDomainError):
            jet_div(Jet2.constant(1.0, 1), jet_var(0.0, 0, 1))

    def test_fractional_power_of_negative(self):
        with pytest.raises(JetDomainError):
            pow_derivatives(-2.0, Fraction(1, 2))

    def test_negative_power_of_zero(self):
        with pytest.raises(JetDomainError):
            pow_derivatives(0.0, -1)

    def test_square_at_zero(self):
        assert pow_derivatives(0.0, 2) == (0.0, 0.0, 2.0)

    def test_linear_power_at_zero(self):
        assert pow_derivatives(0.0, 1) == (0.0, 1.0, 0.0)


class TestAgainstFiniteDifferences:
    # 5 seeds x 200 expressions = 1000 comparisons
    @pytest.mark.parametrize("seed", range(5))
    def test_random_expressions(self, seed):
        rng = np.random.default_rng(1000 + seed)
        m = 3
        checked = 0
        while checked < 200:
            e = random_expr(rng, 3, m)
            u = rng.uniform(-0.8, 0.8, size=m)
            jet = eval_component(e, u)
            if abs(jet.value) > 1e3 or np.abs(jet.grad).max() > 1e3:
                continue
            assert jet.value == pytest.approx(eval_scalar(e, u), rel=1e-12, abs=1e-12)
            g = fd_gradient(e, u)
            assert np.allclose(jet.grad, g, rtol=1e-6, atol=1e-6)
            H = fd_hessian(e, u)
            assert np.allclose(jet.hess, H, rtol=1e-6, atol=1e-6)
            checked += 1
        assert checked == 200

    def test_fractional_power(self):
        e = Pow(BinOp("+", Num(2.0), Var("x", 0)), Fraction(3, 2))
        u = np.array([0.4])
        jet = eval_component(e, u)
        assert jet.grad[0] == pytest.approx(1.5 * 2.4**0.5)
        assert jet.hess[0, 0] == pytest.approx(0.75 * 2.4**-0.5)
