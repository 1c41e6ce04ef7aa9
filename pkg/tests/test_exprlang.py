"""Tests for the expression parser, printer, symbolic derivative and file format."""

from __future__ import annotations

from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from paracontact.errors import ExprSyntaxError, SpecFormatError
from paracontact.exprlang import (
    BinOp,
    Call,
    Integral,
    Neg,
    Num,
    Pow,
    SampledTable,
    TableCall,
    Var,
    differentiate,
    eval_component,
    eval_scalar,
    format_expr,
    format_immersion,
    parse_expr,
    parse_immersion,
    simplify,
    substitute,
)
from paracontact.families import BUILTINS, builtin_text

XYZ = ("x", "y", "z")


def ev(text: str, point=(0.3, -0.2, 0.5)) -> float:
    return eval_scalar(parse_expr(text, XYZ), np.array(point))


class TestPrecedence:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("1 + 2 * 3", 7.0),
            ("(1 + 2) * 3", 9.0),
            ("8 / 4 / 2", 1.0),
            ("8 - 4 - 2", 2.0),
            ("2 ^ 3 ^ 2", 512.0),
            ("-2 ^ 2", -4.0),
            ("(-2) ^ 2", 4.0),
            ("2 * -3", -6.0),
            ("--3", 3.0),
            ("4 ^ (1/2)", 2.0),
            ("2 ^ -1", 0.5),
            ("2 ^ (-2)", 0.25),
            ("1e-3 * 1000", 1.0),
            (".5 + .5", 1.0),
        ],
    )
    def test_constant_arithmetic(self, text, expected):
        assert ev(text) == pytest.approx(expected)

    def test_unary_minus_binds_looser_than_power(self):
        assert parse_expr("-x^2", XYZ) == Neg(Pow(Var("x", 0), Fraction(2)))

    def test_left_associative(self):
        e = parse_expr("x - y - z", XYZ)
        assert e == BinOp("-", BinOp("-", Var("x", 0), Var("y", 1)), Var("z", 2))

    def test_function_call(self):
        assert ev("sinh(x) * cosh(y)") == pytest.approx(np.sinh(0.3) * np.cosh(-0.2))

    def test_chained_integer_exponent_folds(self):
        assert parse_expr("x^2^3", XYZ) == Pow(Var("x", 0), Fraction(8))

    def test_rational_exponent(self):
        assert parse_expr("x^(-1/2)", XYZ) == Pow(Var("x", 0), Fraction(-1, 2))


class TestSyntaxErrors:
    def test_non_literal_exponent(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_expr("x ^ y", XYZ)
        assert "non-literal exponent" in exc.value.reason
        assert (exc.value.line, exc.value.column) == (1, 5)

    def test_unbalanced_open(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_expr("(x + y", XYZ)
        assert "unbalanced parentheses" in exc.value.reason
        assert exc.value.column == 7

    def test_unbalanced_close(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_expr("x + y)", XYZ)
        assert "unbalanced parentheses" in exc.value.reason
        assert exc.value.column == 6

    def test_unknown_identifier(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_expr("x + w", XYZ)
        assert "unknown identifier 'w'" in exc.value.reason
        assert exc.value.column == 5

    def test_unknown_function(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_expr("erf(x)", XYZ)
        assert exc.value.column == 1

    def test_unexpected_character(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_expr("x $ y", XYZ)
        assert exc.value.column == 3

    def test_dangling_operator(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_expr("x + * y", XYZ)
        assert exc.value.column == 5

    def test_integral_rejected_outside_generated_files(self):
        with pytest.raises(ExprSyntaxError):
            parse_expr("integral(y, y)", XYZ)

    def test_integrand_must_use_only_its_variable(self):
        with pytest.raises(ExprSyntaxError):
            parse_expr("integral(x * y, y)", XYZ, generated=True)

    def test_error_message_carries_position(self):
        with pytest.raises(ExprSyntaxError, match=r"line 1, column 5"):
            parse_expr("x ^ y", XYZ)


# Printed forms are canonical: parse → print must reproduce the text exactly.
CANONICAL = [
    "x",
    "3",
    "0.5",
    "1e-05",
    "x + y",
    "x - y - z",
    "x - (y - z)",
    "x + (y + z)",
    "x * y * z",
    "x * (y * z)",
    "x / y / z",
    "x / (y / z)",
    "x / (y * z)",
    "(x + y) * z",
    "(x + y) / (x - y)",
    "-x",
    "--x",
    "-x * y",
    "-(x * y)",
    "-(x + y)",
    "x * -y",
    "x - -y",
    "-x^2",
    "(-x)^2",
    "x^2",
    "x^(-1)",
    "x^(1/2)",
    "x^(-3/2)",
    "(x^2)^3",
    "(x + 1)^3",
    "2.5^3",
    "sinh(x)",
    "cosh(x + y)",
    "sinh(x)^2",
    "exp(-x)",
    "ln(1 + x^2)",
    "sqrt(2 + y)",
    "tanh(x * y) / 2",
    "sin(x) * cos(y)",
    "(x^2 + y^2) / 2",
    "(x^3 + y^3) / 3 + cosh(z)",
    "x + y * z",
    "x * y + z",
    "x - y * z / 2",
    "1 - 2 * x + x^2",
    "sinh(sinh(sinh(z)))",
    "12345.678 * z",
    "x * 0.25 - y * 0.75",
    "exp(x) / (1 + exp(x))",
    "-sinh(z) + x",
    "-1 + x",
    "x^4 - 4 * x^3",
]


def random_tree(rng: np.random.Generator, depth: int):
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.6:
            i = int(rng.integers(3))
            return Var(XYZ[i], i)
        return Num(float(rng.choice([0.0, 1.0, 2.0, 0.5, 3.25, 1e-05, 12345.678, 1e20])))
    kind = int(rng.integers(5))
    if kind == 0:
        return Neg(random_tree(rng, depth - 1))
    if kind == 1:
        c = Fraction(str(rng.choice(["2", "3", "-1", "1/2", "-3/2"])))
        return Pow(random_tree(rng, depth - 1), c)
    if kind == 2:
        return Call(str(rng.choice(["sinh", "cosh", "exp", "tanh"])), random_tree(rng, depth - 1))
    op = str(rng.choice(["+", "-", "*", "/"]))
    return BinOp(op, random_tree(rng, depth - 1), random_tree(rng, depth - 1))


class TestRoundTrip:
    @pytest.mark.parametrize("text", CANONICAL)
    def test_canonical_text(self, text):
        assert format_expr(parse_expr(text, XYZ)) == text

    def test_random_trees(self, rng):
        for _ in range(100):
            tree = random_tree(rng, 5)
            assert parse_expr(format_expr(tree), XYZ) == tree

    def test_integral_prints_in_file_syntax(self):
        e = Integral(Call("cosh", Var("y", 1)), Var("y", 1))
        assert format_expr(e) == "integral(cosh(y), y)"
        assert parse_expr("integral(cosh(y), y)", XYZ, generated=True) == e


class TestSymbolic:
    @pytest.mark.parametrize(
        "text",
        ["x^3 * y", "sinh(x * z)", "x / (1 + y^2)", "exp(-x) * cos(y)", "sqrt(2 + x) - ln(3 + z)"],
    )
    def test_derivative_matches_jets(self, text):
        e = parse_expr(text, XYZ)
        u = np.array([0.3, -0.2, 0.5])
        grad = eval_component(e, u).grad
        for i, name in enumerate(XYZ):
            assert eval_scalar(differentiate(e, name), u) == pytest.approx(grad[i], abs=1e-12)

    def test_derivative_simplifies(self):
        assert differentiate(parse_expr("x - y", XYZ), "z") == Num(0.0)
        assert format_expr(differentiate(parse_expr("cosh(z)", XYZ), "z")) == "sinh(z)"

    def test_simplify_folds_constants(self):
        assert simplify(parse_expr("2 * 3 + 0 * x", XYZ)) == Num(6.0)
        assert simplify(parse_expr("1 * x + 0", XYZ)) == Var("x", 0)
        assert simplify(parse_expr("x - x", XYZ)) == Num(0.0)

    def test_substitute(self):
        e = substitute(parse_expr("x * y", XYZ), {"y": Var("z", 2)})
        assert format_expr(e) == "x * z"

    def test_integral_derivative_is_integrand(self):
        e = Integral(Call("cosh", Var("y", 1)), Var("y", 1))
        assert differentiate(e, "y") == Call("cosh", Var("y", 1))
        assert differentiate(e, "x") == Num(0.0)

    def test_integral_value_and_jet(self):
        e = Integral(Call("cosh", Var("y", 1)), Var("y", 1))
        u = np.array([0.0, 0.7, 0.0])
        jet = eval_component(e, u)
        assert jet.value == pytest.approx(np.sinh(0.7), abs=1e-12)
        assert jet.grad[1] == pytest.approx(np.cosh(0.7))
        assert jet.hess[1, 1] == pytest.approx(np.sinh(0.7))

    def test_sampled_table_interpolates(self):
        ys = np.linspace(-1.0, 1.0, 201)
        table = SampledTable("a1", -1.0, 1.0, tuple(float(v) for v in np.sin(ys)))
        jet = eval_component(TableCall(table, Var("x", 0)), np.array([0.3]))
        assert jet.value == pytest.approx(np.sin(0.3), abs=1e-8)
        assert jet.grad[0] == pytest.approx(np.cos(0.3), abs=1e-6)

    def test_sampled_table_needs_four_samples(self):
        with pytest.raises(SpecFormatError):
            SampledTable("a", 0.0, 1.0, (0.0, 1.0, 2.0))


IMMERSION_HEAD = "n 1\nvars x y z\ndomain -1:1 -1:1 -1:1\n"
F_LINES = "f1 = x\nf2 = y\nf3 = z\nf4 = 0\n"
C_LINES = "C1 = 0\nC2 = 0\nC3 = 0\nC4 = 1\n"


class TestImmersionFile:
    def test_parse_hyperplane(self):
        spec = parse_immersion(IMMERSION_HEAD + F_LINES + C_LINES, name="plane")
        assert spec.n == 1 and spec.m == 3 and spec.dim == 4
        assert spec.var_names == XYZ
        assert spec.domain_box == ((-1.0, 1.0),) * 3
        assert spec.name == "plane"

    def test_comments_and_blank_lines(self):
        text = "# plane\n" + IMMERSION_HEAD + "\n" + F_LINES + "C1 = 0  # none\n" + C_LINES[7:]
        assert parse_immersion(text).c_components[0] == Num(0.0)

    def test_missing_header(self):
        with pytest.raises(SpecFormatError, match="missing header"):
            parse_immersion("vars x y z\n")

    def test_empty_file(self):
        with pytest.raises(SpecFormatError, match="missing header"):
            parse_immersion("")

    def test_too_few_f_components(self):
        text = IMMERSION_HEAD + "f1 = x\nf2 = y\nf3 = z\n" + C_LINES
        with pytest.raises(SpecFormatError, match="expected 4 f components, got 3"):
            parse_immersion(text)

    def test_missing_transversal(self):
        with pytest.raises(SpecFormatError, match="transversal field required"):
            parse_immersion(IMMERSION_HEAD + F_LINES)

    def test_duplicate_key(self):
        with pytest.raises(SpecFormatError, match="duplicate key f1") as exc:
            parse_immersion(IMMERSION_HEAD + F_LINES + "f1 = x\n" + C_LINES)
        assert exc.value.line == 8

    def test_index_out_of_range(self):
        with pytest.raises(SpecFormatError, match="out of range"):
            parse_immersion(IMMERSION_HEAD + F_LINES + "f5 = x\n" + C_LINES)

    def test_reserved_variable_name(self):
        with pytest.raises(SpecFormatError, match="invalid variable name"):
            parse_immersion("n 1\nvars x sinh z\ndomain -1:1 -1:1 -1:1\n" + F_LINES + C_LINES)

    def test_bad_interval(self):
        with pytest.raises(SpecFormatError, match="interval"):
            parse_immersion("n 1\nvars x y z\ndomain 1:-1 -1:1 -1:1\n" + F_LINES + C_LINES)

    def test_expression_error_points_into_the_file(self):
        text = IMMERSION_HEAD + "f1 = x + w\nf2 = y\nf3 = z\nf4 = 0\n" + C_LINES
        with pytest.raises(ExprSyntaxError) as exc:
            parse_immersion(text)
        assert (exc.value.line, exc.value.column) == (4, 10)

    def test_table_lines(self):
        text = IMMERSION_HEAD + "table a1 -1:1 0.0 1.0 2.0 3.0 4.0\n" + F_LINES + C_LINES.replace(
            "C1 = 0", "C1 = a1(z)"
        )
        spec = parse_immersion(text)
        assert isinstance(spec.c_components[0], TableCall)
        assert spec.c_components[0].table.values == (0.0, 1.0, 2.0, 3.0, 4.0)
        assert format_immersion(spec) == text


    def test_derivative_tables_keep_their_samples(self):
        ys = np.linspace(-1.0, 1.0, 9)
        table = SampledTable("a1", -1.0, 1.0, tuple(float(v) for v in np.sin(3 * ys)))
        z = Var("z", 2)
        base = parse_immersion(IMMERSION_HEAD + F_LINES + C_LINES)
        first = differentiate(TableCall(table, z), "z")
        second = differentiate(first, "z")
        spec = replace(base, c_components=(first, second, Num(0.0), Num(1.0)))

        text = format_immersion(spec)
        assert text.count("table ") == 1
        assert "C1 = a1_d1(z)\nC2 = a1_d2(z)\n" in text
        again = parse_immersion(text)
        assert again.c_components == spec.c_components
        assert again.c_components[1].table.values == table.values
        assert format_immersion(again) == text

    def test_derivative_of_undeclared_table(self):
        text = IMMERSION_HEAD + F_LINES + C_LINES.replace("C1 = 0", "C1 = a1_d1(z)")
        with pytest.raises(ExprSyntaxError, match="unknown identifier 'a1_d1'"):
            parse_immersion(text)
    @pytest.mark.parametrize("name", sorted(BUILTINS))
    def test_builtins_are_canonical(self, name):
        text = builtin_text(name)
        assert format_immersion(parse_immersion(text)) == text
