"""Concrete hypersurfaces: the parallel classification family and built-in examples.

Every built-in carries a claims manifest: the verdicts a verification run
must reproduce, where ``"nonzero"`` means the residual exceeds 10³ × its
tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import Tolerances
from .errors import FamilyError, UnknownBuiltinError
from .exprlang import (
    ZERO,
    Expr,
    ImmersionSpec,
    Integral,
    Num,
    Var,
    add,
    call,
    const,
    const_value,
    differentiate,
    div,
    mul,
    parse_expr,
    parse_immersion,
    power,
    simplify,
    substitute,
    variables,
)
from .paraframe import DEFAULT_TOL, para_apply

logger = logging.getLogger(__name__)

# ──────────────────────────────────────────────────────────────────
# Classification family
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class FamilyParams:
    """x_1 b_1 + … + x_2n b_2n + J̃v ∫cosh α(y)dy + v ∫sinh α(y)dy."""

    n: int
    b: np.ndarray  # (2n, 2n+2), one row per b_i
    v: np.ndarray
    alpha: Expr  # in the single variable "y"

    def __post_init__(self) -> None:
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))


def validate_params(p: FamilyParams, tol: Tolerances = DEFAULT_TOL) -> None:
    dim = 2 * p.n + 2
    if p.n < 1:
        raise FamilyError("n must be >= 1")
    if p.b.shape != (2 * p.n, dim) or p.v.shape != (dim,):
        raise FamilyError(f"need {2 * p.n} vectors b_i and v, all of length {dim}")
    for i, bi in enumerate(p.b):
        sign = 1.0 if i < p.n else -1.0
        if not np.array_equal(para_apply(bi), sign * bi):
            label = "+" if sign > 0 else "-"
            raise FamilyError(f"b_{i + 1} is not a J̃ eigenvector for eigenvalue {label}1")
    stack = np.vstack([p.b, p.v, para_apply(p.v)])
    s = np.linalg.svd(stack, compute_uv=False)
    rank = int(np.sum(s > tol.rank * s[0])) if s[0] > 0 else 0
    if rank < dim:
        raise FamilyError(f"b_1..b_{2 * p.n}, v, J̃v have rank {rank} < {dim}")


def _vector_term(coeffs, basis: list[Expr]) -> list[Expr]:
    """Component-wise Σ_i coeffs[i][a] · basis[i]."""
    dim = len(coeffs[0])
    out = []
    for a in range(dim):
        term: Expr = ZERO
        for vec, e in zip(coeffs, basis):
            if vec[a] != 0.0:
                term = add(term, mul(const(vec[a]), e))
        out.append(term)
    return out


def _antiderivatives(alpha: Expr, y: Var) -> tuple[Expr, Expr]:
    """(∫cosh α dy, ∫sinh α dy), closed-form when α is affine in y."""
    slope = simplify(differentiate(alpha, y.name))
    a = const_value(slope)
    if a is not None:
        if a == 0.0:
            b = const_value(simplify(alpha))
            if b is None:
                raise FamilyError("α has zero slope but is not a constant")
            return mul(const(np.cosh(b)), y), mul(const(np.sinh(b)), y)
        return div(call("sinh", alpha), const(a)), div(call("cosh", alpha), const(a))
    logger.debug("α is not affine; using integral nodes")
    return Integral(call("cosh", alpha), y), Integral(call("sinh", alpha), y)


def family_vars(n: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(1, 2 * n + 1)) + ("y",)


def _family_spec(
    p: FamilyParams,
    shifts: list[Expr] | None,
    domain,
    name: str,
) -> ImmersionSpec:
    names = family_vars(p.n)
    m = len(names)
    y = Var("y", m - 1)
    alpha = substitute(p.alpha, {"y": y})
    stray = {v for v in names[:-1] if _uses(alpha, v)}
    if stray:
        raise FamilyError(f"α may only depend on y, also uses {sorted(stray)}")

    xs: list[Expr] = [Var(v, i) for i, v in enumerate(names[:-1])]
    if shifts is not None:
        if len(shifts) != 2 * p.n:
            raise FamilyError(f"need {2 * p.n} shift functions, got {len(shifts)}")
        xs = [add(x, substitute(c, {"y": y})) for x, c in zip(xs, shifts)]

    icosh, isinh = _antiderivatives(alpha, y)
    f = [
        add(lin, extra)
        for lin, extra in zip(
            _vector_term(list(p.b), xs),
            _vector_term([para_apply(p.v), p.v], [icosh, isinh]),
        )
    ]
    half = p.n + 1
    dim = 2 * half
    # C := J̃ f_y
    c = [simplify(differentiate(f[(a + half) % dim], "y")) for a in range(dim)]
    box = tuple(domain) if domain is not None else ((-1.0, 1.0),) * m
    return ImmersionSpec(
        n=p.n,
        var_names=names,
        f_components=tuple(f),
        c_components=tuple(c),
        domain_box=box,
        name=name,
    )


def _uses(e: Expr, name: str) -> bool:
    return any(v.name == name for v in variables(e))


def classification_family(
    p: FamilyParams, domain=None, tol: Tolerances = DEFAULT_TOL
) -> ImmersionSpec:
    validate_params(p, tol)
    return _family_spec(p, None, domain, "family")


def perturbed_family(
    p: FamilyParams, shifts: list[Expr], domain=None, tol: Tolerances = DEFAULT_TOL
) -> ImmersionSpec:
    """Family member with x_i ↦ x_i + c_i(y) and C = J̃f_y.

    The coordinates stay adapted (ξ = ∂_y, flat x-directions) but ∇_ξξ picks
    up c_i'' − ±α'c_i', so ξ is no longer parallel.
    """
    validate_params(p, tol)
    return _family_spec(p, shifts, domain, "perturbed-family")


def random_family_params(
    rng: np.random.Generator, n: int = 1, alpha: Expr | None = None, tol: Tolerances = DEFAULT_TOL
) -> FamilyParams:
    """Eigenvectors (w, ±w) and a random v, redrawn until the rank condition holds."""
    if alpha is None:
        alpha = Var("y", 0)
    half = n + 1
    for _ in range(100):
        w = rng.normal(size=(2 * n, half))
        b = np.array(
            [np.concatenate([wi, wi if i < n else -wi]) for i, wi in enumerate(w)]
        )
        v = rng.normal(size=2 * half)
        p = FamilyParams(n=n, b=b, v=v, alpha=alpha)
        try:
            validate_params(p, tol)
        except FamilyError:
            continue
        return p
    raise FamilyError("could not draw admissible family parameters")


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise FamilyError(f"bad vector {text!r}: expected comma-separated numbers")


def parse_family_params(n: int, b: str, v: str, alpha: str) -> FamilyParams:
    """CLI form: ``b`` is ``VEC;VEC;…``, ``alpha`` an expression in y."""
    return FamilyParams(
        n=n,
        b=np.array([parse_vector(t) for t in b.split(";") if t.strip()]),
        v=parse_vector(v),
        alpha=parse_expr(alpha, ("y",)),
    )


# ──────────────────────────────────────────────────────────────────
# Random immersions with J̃-tangent transversals
# ──────────────────────────────────────────────────────────────────

_SMALL = 0.15


def _random_small(rng: np.random.Generator, xs: list[Var]) -> Expr:
    """A small polynomial-plus-hyperbolic perturbation in the given variables."""
    i, j = rng.choice(len(xs), size=2, replace=True)
    c = rng.uniform(-_SMALL, _SMALL, size=3)
    terms = [
        mul(const(c[0]), mul(xs[i], xs[j])),
        mul(const(c[1]), call("sinh", xs[j])),
        mul(const(c[2]), power(xs[i], 3)),
    ]
    out: Expr = ZERO
    for t in terms:
        out = add(out, t)
    return out


def random_immersion(rng: np.random.Generator, n: int = 1, name: str = "random") -> ImmersionSpec:
    """Graph-like immersion (u_0..u_2n, q(u)) with a J̃-tangent C = J̃f_*(W)."""
    m = 2 * n + 1
    names = tuple(f"u{i}" for i in range(m))
    xs = [Var(v, i) for i, v in enumerate(names)]
    f = [add(x, _random_small(rng, xs)) if k else x for k, x in enumerate(xs)]
    # q ≈ u_{n+1}, so q_{n+1} + q_0 q_n stays away from zero on the box
    f.append(add(xs[n + 1], _random_small(rng, xs)))
    f = [simplify(e) for e in f]
    base = ImmersionSpec(
        n=n,
        var_names=names,
        f_components=tuple(f),
        c_components=tuple(Num(0.0) for _ in range(m + 1)),
        domain_box=((-0.5, 0.5),) * m,
        name=name,
    )
    W = [Num(1.0 + float(rng.uniform(0.0, _SMALL)))] + [mul(const(rng.uniform(-_SMALL, _SMALL)), xs[k]) for k in range(1, m)]
    Phi = add(Num(1.0), mul(const(rng.uniform(-_SMALL, _SMALL)), xs[-1]))
    return jtangent_transversal(base, W, Phi)


def jtangent_transversal(spec: ImmersionSpec, W: list[Expr], Phi: Expr) -> ImmersionSpec:
    """Replace C by Φ·J̃f_*(W); then J̃C = Φf_*(W) is tangent by construction."""
    if len(W) != spec.m:
        raise FamilyError(f"W needs {spec.m} components, got {len(W)}")
    tangent = [
        _sum(mul(w, differentiate(fa, v)) for w, v in zip(W, spec.var_names))
        for fa in spec.f_components
    ]
    half = spec.n + 1
    c = tuple(simplify(mul(Phi, tangent[(a + half) % spec.dim])) for a in range(spec.dim))
    return ImmersionSpec(
        n=spec.n,
        var_names=spec.var_names,
        f_components=spec.f_components,
        c_components=c,
        domain_box=spec.domain_box,
        name=spec.name,
    )


def _sum(terms) -> Expr:
    out: Expr = ZERO
    for t in terms:
        out = add(out, t)
    return out


# ──────────────────────────────────────────────────────────────────
# Built-in examples
# ──────────────────────────────────────────────────────────────────

EXAMPLE_4_6 = """\
n 1
vars x y z
domain -1:1 -1:1 -1:1
f1 = x + y
f2 = sinh(z)
f3 = x - y
f4 = cosh(z)
C1 = x
C2 = sinh(z)
C3 = x
C4 = cosh(z)
"""

EXAMPLE_4_6_BAR = """\
n 1
vars x y z
domain -1:1 -1:1 -1:1
f1 = x + y
f2 = sinh(z)
f3 = x - y
f4 = cosh(z)
C1 = 0
C2 = sinh(z)
C3 = 0
C4 = cosh(z)
"""

EXAMPLE_4_13 = """\
n 1
vars x y z
domain 0.5:2 0.5:2 -1:1
f1 = (x^2 + y^2) / 2
f2 = sinh(z)
f3 = (x^2 - y^2) / 2
f4 = (x^3 + y^3) / 3 + cosh(z)
C1 = 0
C2 = sinh(z)
C3 = 0
C4 = cosh(z)
"""

HYPERPLANE = """\
n 1
vars x y z
domain -1:1 -1:1 -1:1
f1 = x
f2 = y
f3 = z
f4 = 0
C1 = 0
C2 = 0
C3 = 0
C4 = 1
"""


@dataclass(frozen=True)
class Builtin:
    anchor: str
    text: str
    claims: dict[str, str] = field(default_factory=dict)


BUILTINS: dict[str, Builtin] = {
    "example_4_6": Builtin(
        anchor="f = (x+y, sinh z, x-y, cosh z) with C = (x, sinh z, x, cosh z): "
        "∇η = 0 but ∇φ ≠ 0, N not J̃-tangent off z = 0",
        text=EXAMPLE_4_6,
        claims={
            "nabla_eta": "pass",
            "nabla_phi": "nonzero",
            "nabla_xi": "nonzero",
            "normal_jtangency": "nonzero",
        },
    ),
    "example_4_6_bar": Builtin(
        anchor="same f with C̄ = (0, sinh z, 0, cosh z): (φ, ξ, η) parallel, ∇ flat",
        text=EXAMPLE_4_6_BAR,
        claims={"nabla_phi": "pass", "nabla_eta": "pass", "nabla_xi": "pass"},
    ),
    "example_4_13": Builtin(
        anchor="f = (½(x²+y²), sinh z, ½(x²−y²), ⅓(x³+y³)+cosh z): "
        "rank h = 3, ∇ξ = 0 but no parallel φ or η",
        text=EXAMPLE_4_13,
        claims={"nabla_xi": "pass", "nabla_phi": "nonzero", "nabla_eta": "nonzero"},
    ),
    "hyperplane": Builtin(
        anchor="affine hyperplane with constant transversal: every induced object vanishes",
        text=HYPERPLANE,
        claims={"nabla_phi": "pass", "nabla_eta": "pass", "nabla_xi": "pass"},
    ),
}


def _lookup(name: str) -> Builtin:
    try:
        return BUILTINS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTINS))
        raise UnknownBuiltinError(f"unknown builtin {name!r}; known: {known}")


def builtin_text(name: str) -> str:
    return _lookup(name).text


def builtin_claims(name: str) -> dict[str, str]:
    return dict(_lookup(name).claims)


def builtin_example(name: str) -> ImmersionSpec:
    return parse_immersion(_lookup(name).text, name=name)
