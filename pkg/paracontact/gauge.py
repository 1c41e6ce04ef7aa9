"""Transversal-field changes C̄ = ΦC + f_*(Z) and the constructive gauges.

Two code paths must agree: :func:`transform_induced` rewrites the induced
objects pointwise with the change-of-transversal rules, while
:func:`apply_gauge` builds C̄ symbolically so the frame solver can recompute
everything from scratch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import cumulative_simpson

from .config import DEFAULT_PANELS, Tolerances
from .errors import GaugeError, QuadratureError
from .exprlang import (
    ONE,
    ZERO,
    Expr,
    ImmersionSpec,
    SampledTable,
    TableCall,
    Var,
    add,
    const,
    differentiate,
    eval_components,
    mul,
    parse_expr,
    simplify,
)
from .paraframe import (
    DEFAULT_TOL,
    InducedObjects,
    ParacontactFrame,
    frame_at,
    induced_at,
)
from .tensorcalc import local_geometry, make_grid, nabla

logger = logging.getLogger(__name__)

# ──────────────────────────────────────────────────────────────────
# Gauge changes
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class GaugeChange:
    """C̄ = Φ·C + f_*(Z), Z given by its coordinate components."""

    Phi: Expr
    Z: tuple[Expr, ...]

    @classmethod
    def identity(cls, m: int) -> GaugeChange:
        return cls(ONE, (ZERO,) * m)

    @classmethod
    def parse(cls, phi: str, z: list[str], spec: ImmersionSpec) -> GaugeChange:
        if len(z) != spec.m:
            raise GaugeError(f"Z needs {spec.m} components, got {len(z)}")
        return cls(
            parse_expr(phi, spec.var_names),
            tuple(parse_expr(t, spec.var_names) for t in z),
        )


@dataclass(frozen=True, eq=False)
class GaugeAt:
    """Φ, dΦ, Z and ∂_i Z^k (as ``dZ[i, k]``) at one point."""

    Phi: float
    dPhi: np.ndarray
    Z: np.ndarray
    dZ: np.ndarray


def gauge_at(g: GaugeChange, u) -> GaugeAt:
    jets = eval_components((g.Phi, *g.Z), np.asarray(u, dtype=float))
    phi_jet, z_jets = jets[0], jets[1:]
    return GaugeAt(
        Phi=phi_jet.value,
        dPhi=phi_jet.grad,
        Z=np.array([j.value for j in z_jets]),
        dZ=np.array([j.grad for j in z_jets]).T,
    )


def compose_gauges(g1: GaugeChange, g2: GaugeChange) -> GaugeChange:
    """g2 after g1: (Φ₁Φ₂, Φ₂Z₁ + Z₂)."""
    if len(g1.Z) != len(g2.Z):
        raise GaugeError("cannot compose gauges of different dimension")
    return GaugeChange(
        Phi=mul(g1.Phi, g2.Phi),
        Z=tuple(add(mul(g2.Phi, z1), z2) for z1, z2 in zip(g1.Z, g2.Z)),
    )


def transform_induced(
    objs: InducedObjects,
    pc: ParacontactFrame | None,
    g: GaugeAt,
    tol: Tolerances = DEFAULT_TOL,
) -> tuple[InducedObjects, ParacontactFrame | None]:
    """Induced objects of C̄ from those of C, without re-solving the frame."""
    Phi, Z = g.Phi, g.Z
    if Phi == 0.0:
        raise GaugeError("Φ vanishes", {"Phi": Phi})

    h_bar = objs.h / Phi
    Gamma_bar = objs.Gamma - np.einsum("ij,k->kij", objs.h, Z) / Phi
    tau_bar = objs.tau + (Z @ objs.h) / Phi + g.dPhi / Phi
    # (∇_{∂i} Z)^k with the connection of C
    nabla_Z = g.dZ.T + np.einsum("kil,l->ki", objs.Gamma, Z)
    S_bar = Phi * objs.S - nabla_Z + np.outer(Z, tau_bar)
    objs_bar = InducedObjects(Gamma=Gamma_bar, h=h_bar, S=S_bar, tau=tau_bar)

    if pc is None:
        return objs_bar, None
    leak = abs(float(pc.eta @ Z))
    if leak > tol.alg * (1.0 + np.abs(Z).max()):
        raise GaugeError("Z leaves 𝒟: η(Z) ≠ 0", {"eta_Z": leak})
    pc_bar = replace(
        pc,
        xi=Phi * pc.xi + pc.phi @ Z,
        eta=pc.eta / Phi,
        phi=pc.phi - np.outer(Z, pc.eta) / Phi,
    )
    return objs_bar, pc_bar


def tangent_exprs(spec: ImmersionSpec) -> list[list[Expr]]:
    """∂f_a/∂x_i as expressions, indexed [a][i]."""
    return [[differentiate(fa, v) for v in spec.var_names] for fa in spec.f_components]


def _renamed(spec: ImmersionSpec, suffix: str) -> str:
    return f"{spec.name}+{suffix}" if spec.name else suffix


def apply_gauge(spec: ImmersionSpec, g: GaugeChange) -> ImmersionSpec:
    """Same f, transversal ΦC + f_*(Z) assembled symbolically."""
    if len(g.Z) != spec.m:
        raise GaugeError(f"Z needs {spec.m} components, got {len(g.Z)}")
    df = tangent_exprs(spec)
    new_c = []
    for a, ca in enumerate(spec.c_components):
        term = mul(g.Phi, ca)
        for i, zi in enumerate(g.Z):
            term = add(term, mul(zi, df[a][i]))
        new_c.append(term)
    return replace(spec, c_components=tuple(new_c), name=_renamed(spec, "gauge"))


# ──────────────────────────────────────────────────────────────────
# Adapted coordinates
# ──────────────────────────────────────────────────────────────────


def adapted_residuals(spec: ImmersionSpec, points, tol: Tolerances = DEFAULT_TOL) -> dict[str, float]:
    """How far (x_1..x_2n, y) are from coordinates with ξ = ∂_y, ∇η = 0 and
    flat x-directions, with ∂_{x_i} in 𝒟⁺ for i ≤ n and in 𝒟⁻ after."""
    n, m = spec.n, spec.m
    signs = np.array([1.0] * n + [-1.0] * n)
    ey = np.zeros(m)
    ey[-1] = 1.0
    out = dict.fromkeys(
        ("xi_is_dy", "nabla_eta", "nabla_xx", "nabla_xy", "eta_on_x", "x_eigen"), 0.0
    )
    for u in np.atleast_2d(points):
        geo = local_geometry(spec, u, tol)
        pc, G = geo.pc, geo.objs.Gamma
        vals = {
            "xi_is_dy": np.abs(pc.xi - ey).max(),
            "nabla_eta": np.abs(nabla(geo, "eta")).max(),
            "nabla_xx": np.abs(G[:, : 2 * n, : 2 * n]).max(),
            "nabla_xy": np.abs(G[:, : 2 * n, 2 * n]).max(),
            "eta_on_x": np.abs(pc.eta[: 2 * n]).max(),
            "x_eigen": np.abs(pc.phi[:, : 2 * n] - _signed_columns(signs, m)).max(),
        }
        for k, v in vals.items():
            out[k] = max(out[k], float(v))
    return out


def _signed_columns(signs: np.ndarray, m: int) -> np.ndarray:
    cols = np.zeros((m, signs.size))
    cols[np.arange(signs.size), np.arange(signs.size)] = signs
    return cols


# ──────────────────────────────────────────────────────────────────
# η-normalising gauge: ξ̄ = ∂_y
# ──────────────────────────────────────────────────────────────────


def eta_parallel_gauge(
    spec: ImmersionSpec,
    tol: Tolerances = DEFAULT_TOL,
    grid_size: int = 20,
    seed: int = 0,
) -> ImmersionSpec:
    """Gauge with Φ = 1, Z = ∂_y − ξ so that ξ̄ = ∂_y.

    With η(∂_y) = 1 the new field C + f_*(φZ) collapses to J̃f_y, which is
    what gets written out.
    """
    grid = make_grid(spec, grid_size, seed)
    m = spec.m
    ey = np.zeros(m)
    ey[-1] = 1.0
    worst = {"nabla_eta": 0.0, "eta_dy_minus_1": 0.0, "xi_minus_dy": 0.0}
    factors = []
    for u in grid.points:
        geo = local_geometry(spec, u, tol)
        factors.append(float(geo.pc.eta[-1]))
        worst["nabla_eta"] = max(worst["nabla_eta"], float(np.abs(nabla(geo, "eta")).max()))
        worst["eta_dy_minus_1"] = max(worst["eta_dy_minus_1"], abs(factors[-1] - 1.0))
        worst["xi_minus_dy"] = max(worst["xi_minus_dy"], float(np.abs(geo.pc.xi - ey).max()))

    if worst["nabla_eta"] > tol.fd:
        raise GaugeError(
            f"∇η ≠ 0 (max residual {worst['nabla_eta']:.3e}); no η-normalising gauge exists",
            worst,
        )
    if worst["eta_dy_minus_1"] > tol.fd:
        factor = factors[int(np.argmax([abs(f - 1.0) for f in factors]))]
        raise GaugeError(
            f"η(∂_{spec.var_names[-1]}) = {factor!r} ≠ 1; rescale the last coordinate by this factor",
            {**worst, "eta_dy": factor},
        )
    if worst["xi_minus_dy"] <= tol.alg:
        logger.info("ξ is already ∂_%s; identity gauge", spec.var_names[-1])
        return spec

    y = spec.var_names[-1]
    half = spec.dim // 2
    new_c = tuple(
        simplify(differentiate(spec.f_components[(a + half) % spec.dim], y))
        for a in range(spec.dim)
    )
    out = replace(spec, c_components=new_c, name=_renamed(spec, "eta-normalized"))

    post = adapted_residuals(out, grid.points, tol)
    bad = {k: v for k, v in post.items() if v > tol.fd}
    if bad:
        raise GaugeError("η-normalised spec is not in adapted coordinates", post)
    return out


# ──────────────────────────────────────────────────────────────────
# Full parallelisation by quadrature
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class QuadratureTable:
    """Profiles p_i(y), β(y) = h̄(∂_y, ∂_y) and the resulting coefficients a_i."""

    y: np.ndarray
    beta: np.ndarray
    B: np.ndarray  # ∫β, zero at the left endpoint
    p: np.ndarray  # (2n, K)
    a: np.ndarray  # (2n, K)

    def __post_init__(self) -> None:
        if np.any(np.diff(self.y) <= 0):
            raise QuadratureError("quadrature grid must be strictly increasing")

    @property
    def panels(self) -> int:
        return len(self.y) - 1

    def coefficient_tables(self) -> list[SampledTable]:
        lo, hi = float(self.y[0]), float(self.y[-1])
        return [
            SampledTable(f"a{i + 1}", lo, hi, tuple(float(v) for v in row))
            for i, row in enumerate(self.a)
        ]


def _profiles(spec: ImmersionSpec, x, ys, tol: Tolerances) -> tuple[np.ndarray, np.ndarray]:
    n2 = 2 * spec.n
    p = np.empty((n2, len(ys)))
    beta = np.empty(len(ys))
    for t, yv in enumerate(ys):
        objs = induced_at(frame_at(spec, np.append(x, yv), tol))
        p[:, t] = objs.Gamma[:n2, -1, -1]
        beta[t] = objs.h[-1, -1]
    return p, beta


def _coefficients(ys, p, beta, signs) -> tuple[np.ndarray, np.ndarray]:
    B = cumulative_simpson(beta, x=ys, initial=0.0)
    a = np.empty_like(p)
    for i, s in enumerate(signs):
        inner = cumulative_simpson(p[i] * np.exp(-s * B), x=ys, initial=0.0)
        a[i] = -np.exp(s * B) * inner
    return B, a


def check_transverse_constancy(
    spec: ImmersionSpec, tol: Tolerances = DEFAULT_TOL, samples: int = 4, seed: int = 0
) -> float:
    """Max variation of p_i and β across x at fixed y."""
    grid = make_grid(spec, samples * 3, seed).points
    xs = grid[:samples, :-1]
    ys = np.linspace(grid[:, -1].min(), grid[:, -1].max(), 7)
    p0, b0 = _profiles(spec, spec.center()[:-1], ys, tol)
    worst = 0.0
    for x in xs:
        p, b = _profiles(spec, x, ys, tol)
        worst = max(worst, float(np.abs(p - p0).max()), float(np.abs(b - b0).max()))
    return worst


def build_quadrature_table(
    spec: ImmersionSpec, panels: int = DEFAULT_PANELS, tol: Tolerances = DEFAULT_TOL
) -> QuadratureTable:
    if panels < 4 or panels % 2:
        raise QuadratureError("panel count must be an even integer >= 4")
    lo, hi = spec.domain_box[-1]
    ys = np.linspace(lo, hi, panels + 1)
    signs = [1.0] * spec.n + [-1.0] * spec.n
    p, beta = _profiles(spec, spec.center()[:-1], ys, tol)
    B, a = _coefficients(ys, p, beta, signs)

    _, a_half = _coefficients(ys[::2], p[:, ::2], beta[::2], signs)
    drift = float(np.abs(a[:, ::2] - a_half).max()) if a.size else 0.0
    if drift > tol.fd / 10.0:
        raise QuadratureError(
            f"quadrature did not converge: panel halving moved a_i by {drift:.3e}",
            {"drift": drift, "panels": panels},
        )
    logger.debug("quadrature with %d panels, halving drift %.3e", panels, drift)
    return QuadratureTable(y=ys, beta=beta, B=B, p=p, a=a)


def full_parallel_gauge(
    spec: ImmersionSpec,
    panels: int = DEFAULT_PANELS,
    tol: Tolerances = DEFAULT_TOL,
    grid_size: int = 20,
    seed: int = 0,
) -> ImmersionSpec:
    """Make ∇φ = ∇η = ∇ξ = 0 from adapted coordinates.

    With p_i = Γ̄^i_yy and β = h̄_yy, Z = Σ a_i(y)∂_{x_i} where a_i solves
    a_i' = ±β a_i − p_i (+ on 𝒟⁺ coordinates). The result is
    C̄̄ = C̄ + f_*(φZ) with the a_i as spline tables.
    """
    grid = make_grid(spec, grid_size, seed)
    pre = adapted_residuals(spec, grid.points, tol)
    bad = {k: v for k, v in pre.items() if v > tol.fd}
    if bad:
        raise GaugeError("spec is not in adapted coordinates; run the η-normalising gauge first", pre)
    spread = check_transverse_constancy(spec, tol, seed=seed)
    if spread > tol.transverse:
        raise GaugeError(
            f"p_i or β vary across 𝒟 by {spread:.3e}", {"transverse_spread": spread}
        )

    table = build_quadrature_table(spec, panels, tol)
    if np.abs(table.p).max() < tol.fd:
        logger.info("∇ξ already vanishes along ξ; identity gauge")
        return spec

    n2 = 2 * spec.n
    y = Var(spec.var_names[-1], spec.m - 1)
    df = tangent_exprs(spec)
    signs = [1.0] * spec.n + [-1.0] * spec.n
    coeffs = [
        mul(const(s), TableCall(t, y)) for s, t in zip(signs, table.coefficient_tables())
    ]
    new_c = []
    for a, ca in enumerate(spec.c_components):
        term = ca
        for i in range(n2):
            term = add(term, mul(coeffs[i], df[a][i]))
        new_c.append(term)
    out = replace(spec, c_components=tuple(new_c), name=_renamed(spec, "parallel"))

    worst = 0.0
    for u in grid.points:
        geo = local_geometry(out, u, tol)
        worst = max(worst, *(float(np.abs(nabla(geo, k)).max()) for k in ("phi", "eta", "xi")))
    if worst > tol.fd:
        raise GaugeError(
            f"gauged structure is not parallel (max residual {worst:.3e})",
            {"parallel_residual": worst},
        )
    return out

