"""Grid-sweep verification: every structural identity as a named residual.

A sweep evaluates one :class:`~paracontact.tensorcalc.LocalGeometry` per grid
point and hands it to each check, so the finite-difference stencil is paid
once per point. Per-point failures become failed entries; they never abort
the sweep.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .config import Tolerances
from .errors import NotJTangentError, ParacontactError
from .exprlang import ImmersionSpec
from .paraframe import DEFAULT_TOL, InducedObjects, euclidean_normal_at, structure_residuals
from .tensorcalc import (
    Grid,
    LocalGeometry,
    VectorSample,
    bracket,
    calibrate_kappa,
    coordinate_field,
    covariant,
    curvature,
    eta_of_field,
    exterior_tau,
    local_geometry,
    make_grid,
    nabla,
    phi_field,
    projector_fields,
    ricci_lhs,
    scaled_field,
)

logger = logging.getLogger(__name__)

NONZERO_FACTOR = 1e3

Tamper = dict[str, Callable[[LocalGeometry], LocalGeometry]]

# ──────────────────────────────────────────────────────────────────
# Reports
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class CheckEntry:
    name: str
    anchor: str
    residual: float
    tol: float
    status: str  # pass | fail | n/a
    worst_point: tuple[float, ...] | None = None
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "fail"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "residual": self.residual if math.isfinite(self.residual) else None,
            "tol": self.tol,
            "pass": None if self.status == "n/a" else self.status == "pass",
            "status": self.status,
            "worst_point": list(self.worst_point) if self.worst_point is not None else None,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class CheckReport:
    spec: str
    grid: dict
    seed: int
    entries: tuple[CheckEntry, ...]
    kappa: dict | None = None

    @property
    def overall(self) -> str:
        return "fail" if any(e.failed for e in self.entries) else "pass"

    @property
    def passed(self) -> bool:
        return self.overall == "pass"

    def entry(self, name: str) -> CheckEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def merge(self, other: CheckReport) -> CheckReport:
        return replace(
            self, entries=self.entries + other.entries, kappa=self.kappa or other.kappa
        )

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "seed": self.seed,
            "grid": self.grid,
            "checks": [e.to_dict() for e in self.entries],
            "overall": self.overall,
            "kappa": self.kappa,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def format_text(self) -> str:
        header = ("check", "status", "residual", "tol", "worst point")
        rows = [
            (
                e.name,
                e.status,
                repr(e.residual),
                repr(e.tol),
                "-" if e.worst_point is None else ",".join(repr(c) for c in e.worst_point),
            )
            for e in self.entries
        ]
        widths = [max(len(r[i]) for r in [header, *rows]) for i in range(4)]
        lines = [f"spec: {self.spec}  grid: {self.grid['points']} points  seed: {self.seed}"]
        for r in [header, *rows]:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)) + "  " + r[4])
        notes = [f"  {e.name}: {e.detail}" for e in self.entries if e.detail]
        if notes:
            lines.append("notes:")
            lines.extend(notes)
        lines.append(f"overall: {self.overall}")
        return "\n".join(lines) + "\n"


class _Accumulator:
    """Max-merge of per-point residuals into report entries."""

    def __init__(self, checks: dict[str, tuple[str, float]]) -> None:
        self.checks = checks
        self.worst = {name: (0.0, None) for name in checks}
        self.errors: dict[str, str] = {}

    def add(self, values: dict[str, float], u: np.ndarray) -> None:
        for name, value in values.items():
            if value > self.worst[name][0] or self.worst[name][1] is None:
                self.worst[name] = (float(value), tuple(float(c) for c in u))

    def fail(self, u: np.ndarray, message: str, names=None) -> None:
        for name in names or self.checks:
            self.worst[name] = (math.inf, tuple(float(c) for c in u))
            self.errors.setdefault(name, message)

    def entries(self, applicable: bool = True, details: dict[str, str] | None = None) -> list[CheckEntry]:
        details = details or {}
        out = []
        for name, (anchor, tol) in self.checks.items():
            residual, point = self.worst[name]
            if name in self.errors:
                status, detail = "fail", self.errors[name]
            elif not applicable:
                status, detail = "n/a", details.get(name, "")
            else:
                status = "pass" if residual <= tol else "fail"
                detail = details.get(name, "")
            out.append(CheckEntry(name, anchor, residual, tol, status, point, detail))
        return out


# ──────────────────────────────────────────────────────────────────
# Sweeps
# ──────────────────────────────────────────────────────────────────


def _parallel_map(fn, items, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _safe_geometry(spec: ImmersionSpec, u, tol: Tolerances):
    try:
        try:
            return local_geometry(spec, u, tol, paracontact=True)
        except NotJTangentError:
            return local_geometry(spec, u, tol, paracontact=False)
    except (ParacontactError, np.linalg.LinAlgError) as exc:
        return exc


def sweep_geometries(
    spec: ImmersionSpec, grid: Grid, tol: Tolerances = DEFAULT_TOL, threads: int = 1
) -> list:
    """LocalGeometry per grid point, or the exception that point raised."""
    return _parallel_map(lambda u: _safe_geometry(spec, u, tol), list(grid.points), threads)


def _run_pointwise(
    grid: Grid,
    geometries: list,
    acc: _Accumulator,
    fn: Callable[[LocalGeometry], dict[str, float]],
) -> None:
    for u, geo in zip(grid.points, geometries):
        if isinstance(geo, Exception):
            acc.fail(u, str(geo))
            continue
        try:
            acc.add(fn(geo), u)
        except (ParacontactError, np.linalg.LinAlgError) as exc:
            acc.fail(u, str(exc))


def _maxabs(a) -> float:
    a = np.asarray(a)
    return float(np.abs(a).max()) if a.size else 0.0


def _tampered(tamper: Tamper | None, name: str, geo: LocalGeometry) -> LocalGeometry:
    if tamper and name in tamper:
        return tamper[name](geo)
    return geo


def _report(spec: ImmersionSpec, grid: Grid, entries, kappa=None) -> CheckReport:
    return CheckReport(
        spec=spec.name or "<unnamed>",
        grid=grid.describe(),
        seed=grid.seed,
        entries=tuple(entries),
        kappa=kappa,
    )


def _prepare(spec, grid, tol, threads, geometries):
    if geometries is None:
        geometries = sweep_geometries(spec, grid, tol, threads)
    return geometries


# ──────────────────────────────────────────────────────────────────
# Fundamental equations (arbitrary transversal field)
# ──────────────────────────────────────────────────────────────────


def check_fundamental(
    spec: ImmersionSpec,
    grid: Grid,
    tol: Tolerances = DEFAULT_TOL,
    *,
    threads: int = 1,
    geometries: list | None = None,
    tamper: Tamper | None = None,
) -> CheckReport:
    calib = calibrate_kappa()
    kappa = calib.kappa
    acc = _Accumulator(
        {
            "gauss_reconstruction": ("D_X f_*Y = f_*(∇_X Y) + h(X,Y)C, D_X C = -f_*(SX) + τ(X)C", tol.alg),
            "gauss_equation": ("R(X,Y)Z = h(Y,Z)SX - h(X,Z)SY", tol.fd),
            "codazzi_h": ("(∇_X h)(Y,Z) + τ(X)h(Y,Z) symmetric in X, Y", tol.fd),
            "codazzi_S": ("(∇_X S)Y - τ(X)SY symmetric in X, Y", tol.fd),
            "ricci_equation": ("h(X,SY) - h(SX,Y) = 2dτ(X,Y)", tol.fd),
            "first_bianchi": ("cyclic sum of R(X,Y)Z vanishes", tol.fd),
            "fd_step_halving": ("halving the FD step moves derivatives by < 10 tol", 10 * tol.fd),
        }
    )

    def point(geo: LocalGeometry) -> dict[str, float]:
        g = _tampered(tamper, "gauss_equation", geo)
        R = curvature(g).R
        h, S = g.objs.h, g.objs.S
        gauss_rhs = np.einsum("jk,li->lkij", h, S) - np.einsum("ik,lj->lkij", h, S)

        g = _tampered(tamper, "codazzi_h", geo)
        ch = nabla(g, "h") + np.einsum("i,jk->ijk", g.objs.tau, g.objs.h)

        g = _tampered(tamper, "codazzi_S", geo)
        cs = nabla(g, "S") - np.einsum("i,kj->ikj", g.objs.tau, g.objs.S)

        g = _tampered(tamper, "ricci_equation", geo)
        ricci = ricci_lhs(g.objs) - 2.0 * kappa * exterior_tau(g)

        g = _tampered(tamper, "first_bianchi", geo)
        return {
            "gauss_reconstruction": geo.objs.residual,
            "gauss_equation": _maxabs(R - gauss_rhs),
            "codazzi_h": _maxabs(ch - ch.swapaxes(0, 1)),
            "codazzi_S": _maxabs(cs - cs.transpose(2, 1, 0)),
            "ricci_equation": _maxabs(ricci),
            "first_bianchi": _maxabs(curvature(g).first_bianchi()),
            "fd_step_halving": geo.fd_spread,
        }

    geometries = _prepare(spec, grid, tol, threads, geometries)
    _run_pointwise(grid, geometries, acc, point)
    return _report(spec, grid, acc.entries(), calib.as_dict())


# ──────────────────────────────────────────────────────────────────
# Structure equations of the induced almost paracontact structure
# ──────────────────────────────────────────────────────────────────


def probe_fields(spec: ImmersionSpec, u, seed: int, count: int = 3) -> list[VectorSample]:
    """Coordinate fields plus a(u)∂_p with random quadratic a, so brackets are nonzero."""
    m = spec.m
    rng = np.random.default_rng(seed + 1)
    c = spec.center()
    fields = [coordinate_field(p, m) for p in range(m)]
    d = np.asarray(u) - c
    for _ in range(count):
        g = 0.5 * rng.normal(size=m)
        Q = 0.25 * rng.normal(size=(m, m))
        Q = Q + Q.T
        p = int(rng.integers(m))
        a = 1.0 + g @ d + 0.5 * d @ Q @ d
        fields.append(scaled_field(a, g + Q @ d, p, m))
    return fields


_IDENTITY_NAMES = ("eta_of_nabla", "phi_of_nabla", "eta_of_bracket", "phi_of_bracket")


def structure_identities(geo: LocalGeometry, fields: list[VectorSample]) -> dict[str, float]:
    pc = geo.require_paracontact()
    h, S, tau = geo.objs.h, geo.objs.S, geo.objs.tau
    eta, phi, xi = pc.eta, pc.phi, pc.xi
    worst = dict.fromkeys(_IDENTITY_NAMES, 0.0)
    for X in fields:
        eX, _ = eta_of_field(geo, X)
        phiX = phi_field(geo, X)
        for Y in fields:
            eY, grad_eY = eta_of_field(geo, Y)
            phiY = phi_field(geo, Y)
            nXY = covariant(geo, X, Y)
            X_eY = X.value @ grad_eY
            Y_eX = Y.value @ eta_of_field(geo, X)[1]
            hX_phiY = X.value @ h @ phiY.value
            hY_phiX = Y.value @ h @ phiX.value
            tX, tY = tau @ X.value, tau @ Y.value
            SX, SY = S @ X.value, S @ Y.value

            r36 = eta @ nXY - (hX_phiY + X_eY + eY * tX)
            r37 = phi @ nXY - (covariant(geo, X, phiY) - eY * SX - (X.value @ h @ Y.value) * xi)
            br = bracket(X, Y)
            r38 = eta @ br - (hX_phiY - hY_phiX + X_eY - Y_eX + eY * tX - eX * tY)
            r39 = phi @ br - (
                covariant(geo, X, phiY) - covariant(geo, Y, phiX) + eX * SY - eY * SX
            )
            for name, r in zip(worst, (r36, r37, r38, r39)):
                worst[name] = max(worst[name], _maxabs(r))
    return worst


def check_structure_equations(
    spec: ImmersionSpec,
    grid: Grid,
    tol: Tolerances = DEFAULT_TOL,
    *,
    threads: int = 1,
    geometries: list | None = None,
    tamper: Tamper | None = None,
) -> CheckReport:
    acc = _Accumulator(
        {
            "paracontact_algebra": ("φ² = Id - η⊗ξ, η(ξ) = 1, φξ = 0, η∘φ = 0, φ = ±1 on 𝒟±", tol.alg),
            "eta_of_nabla": ("η(∇_X Y) = h(X,φY) + X(η(Y)) + η(Y)τ(X)", tol.fd),
            "phi_of_nabla": ("φ(∇_X Y) = ∇_X φY - η(Y)SX - h(X,Y)ξ", tol.fd),
            "eta_of_bracket": ("η([X,Y]) = h(X,φY) - h(Y,φX) + X(ηY) - Y(ηX) + η(Y)τ(X) - η(X)τ(Y)", tol.fd),
            "phi_of_bracket": ("φ([X,Y]) = ∇_X φY - ∇_Y φX + η(X)SY - η(Y)SX", tol.fd),
            "eta_nabla_xi": ("η(∇_X ξ) = τ(X)", tol.fd),
            "eta_S": ("η(SX) = -h(X,ξ)", tol.alg),
            "eta_xi_derivative": ("(∇_X η)(ξ) + η(∇_X ξ) = X(η(ξ)) = 0", 2 * tol.fd),
        }
    )

    def point(geo: LocalGeometry) -> dict[str, float]:
        if geo.pc is None:
            raise NotJTangentError("C is not J̃-tangent", geo.u)
        fields = probe_fields(spec, geo.u, grid.seed)
        # tamper keys are entry names; each entry sees only its own override
        views = {name: _tampered(tamper, name, geo) for name in acc.checks}
        out = {}
        untouched = [n for n in _IDENTITY_NAMES if views[n] is geo]
        if untouched:
            values = structure_identities(geo, fields)
            out.update({n: values[n] for n in untouched})
        for name in _IDENTITY_NAMES:
            if views[name] is not geo:
                out[name] = structure_identities(views[name], fields)[name]

        g = views["paracontact_algebra"]
        out["paracontact_algebra"] = max(structure_residuals(g.pc).values())
        g = views["eta_nabla_xi"]
        out["eta_nabla_xi"] = _maxabs(nabla(g, "xi") @ g.pc.eta - g.objs.tau)
        g = views["eta_S"]
        out["eta_S"] = _maxabs(g.pc.eta @ g.objs.S + g.objs.h @ g.pc.xi)
        g = views["eta_xi_derivative"]
        out["eta_xi_derivative"] = _maxabs(nabla(g, "eta") @ g.pc.xi + nabla(g, "xi") @ g.pc.eta)
        return out

    geometries = _prepare(spec, grid, tol, threads, geometries)
    _run_pointwise(grid, geometries, acc, point)
    return _report(spec, grid, acc.entries())


# ──────────────────────────────────────────────────────────────────
# Parallelism and its consequences
# ──────────────────────────────────────────────────────────────────


def check_parallelism(
    spec: ImmersionSpec,
    grid: Grid,
    tol: Tolerances = DEFAULT_TOL,
    *,
    threads: int = 1,
    geometries: list | None = None,
) -> CheckReport:
    acc = _Accumulator(
        {
            "nabla_phi": ("∇φ = 0", tol.fd),
            "nabla_eta": ("∇η = 0", tol.fd),
            "nabla_xi": ("∇ξ = 0", tol.fd),
        }
    )

    def point(geo: LocalGeometry) -> dict[str, float]:
        if geo.pc is None:
            raise NotJTangentError("C is not J̃-tangent", geo.u)
        return {f"nabla_{k}": _maxabs(nabla(geo, k)) for k in ("phi", "eta", "xi")}

    geometries = _prepare(spec, grid, tol, threads, geometries)
    _run_pointwise(grid, geometries, acc, point)
    return _report(spec, grid, acc.entries())


def rank_h_at(objs: InducedObjects, tol: float = DEFAULT_TOL.rank) -> int:
    """Numerical rank of h; singular values are compared against tol·max(1, σ_max)."""
    s = np.linalg.svd(objs.h, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, float(s[0]))))


def _leak(P_other: np.ndarray, eta: np.ndarray, v: np.ndarray) -> float:
    return max(_maxabs(P_other @ v), abs(float(eta @ v)))


def consequence_residuals(geo: LocalGeometry, kappa: float) -> dict[str, float]:
    pc = geo.require_paracontact()
    h, S, tau = geo.objs.h, geo.objs.S, geo.objs.tau
    xi, eta = pc.xi, pc.eta
    PD = pc.projector_D
    m = geo.m
    coords = [coordinate_field(i, m) for i in range(m)]
    D_fields = projector_fields(geo, 0)

    # E[i, j] = η(∇_{∂i} P_𝒟∂_j)
    E = np.array([[eta @ covariant(geo, X, Y) for Y in D_fields] for X in coords])
    nxi = nabla(geo, "xi")
    grad_hxx = np.einsum("ijk,j,k->i", geo.d_h, xi, xi) + 2.0 * geo.d_xi @ (h @ xi)

    out = {
        "h_DD": _maxabs(PD.T @ h @ PD),
        "h_xi_D": _maxabs(xi @ h @ PD),
        "phi.S_D": _maxabs(S @ PD),
        "phi.S_xi": _maxabs(S @ xi + (xi @ h @ xi) * xi),
        "phi.dtau": _maxabs(kappa * exterior_tau(geo)),
        "phi.curvature": _maxabs(curvature(geo).R),
        "phi.nabla_eta": _maxabs(nabla(geo, "eta") + np.outer(tau, eta)),
        "eta.tau": _maxabs(tau),
        "eta.D_closed": max(_maxabs(PD.T @ E), _maxabs(xi @ E)),
        "eta.nabla_xi_in_D": _maxabs(nxi @ eta),
        "eta.h_xi_xi_along_D": _maxabs(PD.T @ grad_hxx),
        "rank_h": float(np.linalg.svd(h, compute_uv=False)[1]) if m > 1 else 0.0,
        "D_parallel": _maxabs(E),
    }
    for sign, label in ((1, "Dp"), (-1, "Dm")):
        fields = projector_fields(geo, sign)
        other = pc.projector(-sign)
        par = max(_leak(other, eta, covariant(geo, X, Y)) for X in coords for Y in fields)
        inv = max(
            _leak(other, eta, bracket(fields[p], fields[q]))
            for p in range(m)
            for q in range(p + 1, m)
        )
        out[f"{label}_parallel"] = par
        out[f"{label}_involutive"] = inv
    return out


_PHI_BRANCH = ("phi.S_D", "phi.S_xi", "phi.dtau", "phi.curvature", "phi.nabla_eta")
_ETA_BRANCH = ("eta.tau", "eta.D_closed", "eta.nabla_xi_in_D", "eta.h_xi_xi_along_D")
_EITHER = (
    "h_DD",
    "h_xi_D",
    "rank_h",
    "D_parallel",
    "Dp_parallel",
    "Dm_parallel",
    "Dp_involutive",
    "Dm_involutive",
)

_ANCHORS = {
    "h_DD": "h = 0 on 𝒟 × 𝒟",
    "h_xi_D": "h(ξ, X) = 0 for X in 𝒟",
    "phi.S_D": "∇φ = 0 ⇒ S = 0 on 𝒟",
    "phi.S_xi": "∇φ = 0 ⇒ Sξ = -h(ξ,ξ)ξ",
    "phi.dtau": "∇φ = 0 ⇒ dτ = 0",
    "phi.curvature": "∇φ = 0 ⇒ R = 0",
    "phi.nabla_eta": "∇φ = 0 ⇒ (∇_X η)Y = -η(Y)τ(X)",
    "eta.tau": "∇η = 0 ⇒ τ = 0",
    "eta.D_closed": "∇η = 0 ⇒ ∇_X Y, ∇_ξ Y in 𝒟 for X, Y in 𝒟",
    "eta.nabla_xi_in_D": "∇η = 0 ⇒ ∇_X ξ in 𝒟",
    "eta.h_xi_xi_along_D": "∇η = 0 ⇒ X(h(ξ,ξ)) = 0 for X in 𝒟",
    "rank_h": "rank h ≤ 1 (second singular value of h)",
    "D_parallel": "𝒟 is ∇-parallel",
    "Dp_parallel": "𝒟⁺ is ∇-parallel",
    "Dm_parallel": "𝒟⁻ is ∇-parallel",
    "Dp_involutive": "𝒟⁺ is involutive",
    "Dm_involutive": "𝒟⁻ is involutive",
}


def check_lemma_consequences(
    spec: ImmersionSpec,
    grid: Grid,
    tol: Tolerances = DEFAULT_TOL,
    *,
    threads: int = 1,
    geometries: list | None = None,
    parallelism: CheckReport | None = None,
) -> CheckReport:
    """Consequences of ∇φ = 0 or ∇η = 0; entries are n/a when the hypothesis fails."""
    geometries = _prepare(spec, grid, tol, threads, geometries)
    if parallelism is None:
        parallelism = check_parallelism(spec, grid, tol, geometries=geometries)
    phi_par = parallelism.entry("nabla_phi").status == "pass"
    eta_par = parallelism.entry("nabla_eta").status == "pass"
    kappa = calibrate_kappa().kappa

    branches = [(_PHI_BRANCH, phi_par), (_ETA_BRANCH, eta_par), (_EITHER, phi_par or eta_par)]
    accs = [
        _Accumulator({name: (_ANCHORS[name], tol.fd) for name in names}) for names, _ in branches
    ]
    ranks: list[int] = []

    for u, geo in zip(grid.points, geometries):
        if isinstance(geo, Exception):
            for acc in accs:
                acc.fail(u, str(geo))
            continue
        try:
            if geo.pc is None:
                raise NotJTangentError("C is not J̃-tangent", geo.u)
            values = consequence_residuals(geo, kappa)
            ranks.append(rank_h_at(geo.objs, tol.rank))
        except (ParacontactError, np.linalg.LinAlgError) as exc:
            for acc in accs:
                acc.fail(u, str(exc))
            continue
        for acc, (names, _) in zip(accs, branches):
            acc.add({k: values[k] for k in names}, u)

    rank_note = f"rank h = {max(ranks)} (max over grid)" if ranks else ""
    entries: list[CheckEntry] = []
    for acc, (names, applicable) in zip(accs, branches):
        details = {"rank_h": rank_note}
        if not applicable:
            why = "requires ∇φ = 0" if names is _PHI_BRANCH else (
                "requires ∇η = 0" if names is _ETA_BRANCH else "requires ∇φ = 0 or ∇η = 0"
            )
            details = {n: why for n in names}
            if "rank_h" in names:
                details["rank_h"] = f"{why}; {rank_note}"
        entries += acc.entries(applicable, details)
    return _report(spec, grid, entries)


# ──────────────────────────────────────────────────────────────────
# Euclidean normal
# ──────────────────────────────────────────────────────────────────


def check_normal(
    spec: ImmersionSpec,
    grid: Grid,
    tol: Tolerances = DEFAULT_TOL,
    *,
    threads: int = 1,
    geometries: list | None = None,
) -> CheckReport:
    """Distance of J̃N from the tangent space; informational unless claimed."""
    acc = _Accumulator({"normal_jtangency": ("J̃N tangent for the Euclidean normal N", tol.rank)})
    tangent = 0

    def point(geo: LocalGeometry) -> dict[str, float]:
        nonlocal tangent
        _, ok, residual = euclidean_normal_at(geo.frame, tol)
        tangent += ok
        return {"normal_jtangency": residual}

    geometries = _prepare(spec, grid, tol, threads, geometries)
    _run_pointwise(grid, geometries, acc, point)
    note = {"normal_jtangency": f"J̃N tangent at {tangent} of {grid.size} points"}
    return _report(spec, grid, acc.entries(applicable=False, details=note))


# ──────────────────────────────────────────────────────────────────
# Suite and claims
# ──────────────────────────────────────────────────────────────────


def run_suite(
    spec: ImmersionSpec,
    grid: Grid | None = None,
    tol: Tolerances = DEFAULT_TOL,
    *,
    threads: int = 1,
) -> CheckReport:
    grid = grid or make_grid(spec)
    geometries = sweep_geometries(spec, grid, tol, threads)
    jtangent = any(not isinstance(g, Exception) and g.pc is not None for g in geometries)

    report = check_fundamental(spec, grid, tol, geometries=geometries)
    report = report.merge(check_normal(spec, grid, tol, geometries=geometries))
    if not jtangent:
        logger.warning("%s: C is not J̃-tangent; only the affine checks apply", spec.name)
        return report
    parallel = check_parallelism(spec, grid, tol, geometries=geometries)
    report = report.merge(check_structure_equations(spec, grid, tol, geometries=geometries))
    report = report.merge(parallel)
    return report.merge(
        check_lemma_consequences(spec, grid, tol, geometries=geometries, parallelism=parallel)
    )


def apply_claims(report: CheckReport, claims: dict[str, str]) -> CheckReport:
    """Re-judge entries against expected verdicts ("pass" or "nonzero")."""
    entries = list(report.entries)
    names = [e.name for e in entries]
    for name, expect in claims.items():
        if expect not in ("pass", "nonzero"):
            raise ValueError(f"unknown claim {expect!r} for {name}")
        if name not in names:
            entries.append(
                CheckEntry(name, "claim", math.inf, 0.0, "fail", None, "claimed check was not run")
            )
            continue
        i = names.index(name)
        e = entries[i]
        if not math.isfinite(e.residual):
            ok = False
        elif expect == "pass":
            ok = e.residual <= e.tol
        else:
            ok = e.residual > NONZERO_FACTOR * e.tol
        detail = f"claim: {expect}" + (f"; {e.detail}" if e.detail else "")
        entries[i] = replace(e, status="pass" if ok else "fail", detail=detail)
    return replace(report, entries=tuple(entries))


__all__ = [
    "CheckEntry",
    "CheckReport",
    "apply_claims",
    "check_fundamental",
    "check_lemma_consequences",
    "check_normal",
    "check_parallelism",
    "check_structure_equations",
    "rank_h_at",
    "run_suite",
    "sweep_geometries",
]
