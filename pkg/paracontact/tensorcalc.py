"""Covariant derivatives, curvature and dτ of the induced tensor fields.

Pointwise tensors come from the jet-exact frame solves in :mod:`paraframe`.
Their partial derivatives are taken by central differences with one level of
Richardson extrapolation. Derivative arrays put the direction index first:
``d_phi[i, k, j] = ∂_i φ^k_j``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .config import Tolerances
from .errors import FrameError
from .exprlang import ImmersionSpec, parse_immersion
from .paraframe import (
    DEFAULT_TOL,
    FrameData,
    InducedObjects,
    ParacontactFrame,
    frame_at,
    induced_at,
    paracontact_at,
    paracontact_tensors,
)

logger = logging.getLogger(__name__)

FD_BASE_STEP = 1e-4
GRID_MARGIN_STEPS = 4

# ──────────────────────────────────────────────────────────────────
# Finite differences
# ──────────────────────────────────────────────────────────────────


def fd_step(x: float) -> float:
    return FD_BASE_STEP * (1.0 + abs(x))


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Stencil evaluations of a field along one coordinate direction."""

    center: np.ndarray
    direction: int
    step: float
    plus: np.ndarray
    minus: np.ndarray
    plus_half: np.ndarray
    minus_half: np.ndarray

    def __post_init__(self) -> None:
        if not self.step > 0:
            raise FrameError("finite-difference step must be positive", self.center)

    def central(self, half: bool = False) -> np.ndarray:
        if half:
            return (self.plus_half - self.minus_half) / self.step
        return (self.plus - self.minus) / (2.0 * self.step)

    def derivative(self) -> np.ndarray:
        return (4.0 * self.central(half=True) - self.central()) / 3.0

    def spread(self) -> float:
        """How much halving the step moved the estimate."""
        return float(np.max(np.abs(self.central(half=True) - self.central())))


def _shrunk_step(u: np.ndarray, direction: int, box) -> float:
    h = fd_step(u[direction])
    if box is None:
        return h
    lower, upper = box
    room = min(u[direction] - lower[direction], upper[direction] - u[direction])
    if room <= 0:
        raise FrameError("finite-difference stencil leaves the domain", u)
    return min(h, room)


def sample_field(
    field: Callable[[np.ndarray], np.ndarray], u, direction: int, box=None
) -> FieldSample:
    u = np.asarray(u, dtype=float)
    h = _shrunk_step(u, direction, box)
    e = np.zeros_like(u)
    e[direction] = 1.0
    return FieldSample(
        center=u,
        direction=direction,
        step=h,
        plus=np.asarray(field(u + h * e), dtype=float),
        minus=np.asarray(field(u - h * e), dtype=float),
        plus_half=np.asarray(field(u + 0.5 * h * e), dtype=float),
        minus_half=np.asarray(field(u - 0.5 * h * e), dtype=float),
    )


def d_field(field: Callable[[np.ndarray], np.ndarray], u, direction: int, box=None):
    """∂_direction of ``field`` at ``u`` (scalar or array valued)."""
    value = sample_field(field, u, direction, box).derivative()
    return float(value) if np.ndim(value) == 0 else value


# ──────────────────────────────────────────────────────────────────
# Sample grids
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class Grid:
    points: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return len(self.points)

    def describe(self) -> dict:
        return {"points": self.size, "seed": self.seed, "sampler": "halton"}


def make_grid(spec: ImmersionSpec, size: int = 50, seed: int = 0) -> Grid:
    """Scrambled Halton points in the domain interior, 4 FD steps from the boundary."""
    lower, upper = spec.lower, spec.upper
    margin = GRID_MARGIN_STEPS * np.array(
        [fd_step(max(abs(lo), abs(hi))) for lo, hi in spec.domain_box]
    )
    lo, hi = lower + margin, upper - margin
    if np.any(lo >= hi):
        raise FrameError("domain box is too small for the finite-difference margin")
    sampler = qmc.Halton(d=spec.m, scramble=True, seed=np.random.default_rng(seed))
    return Grid(points=qmc.scale(sampler.random(size), lo, hi), seed=seed)


# ──────────────────────────────────────────────────────────────────
# Local geometry: one stencil shared by every tensor check at a point
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class LocalGeometry:
    u: np.ndarray
    frame: FrameData
    objs: InducedObjects
    pc: ParacontactFrame | None
    d_Gamma: np.ndarray
    d_h: np.ndarray
    d_S: np.ndarray
    d_tau: np.ndarray
    d_xi: np.ndarray | None = None
    d_eta: np.ndarray | None = None
    d_phi: np.ndarray | None = None
    fd_spread: float = 0.0

    @property
    def m(self) -> int:
        return self.u.size

    def require_paracontact(self) -> ParacontactFrame:
        if self.pc is None:
            raise FrameError("paracontact structure was not computed", self.u)
        return self.pc


def _geometry_field(spec: ImmersionSpec, tol: Tolerances, paracontact: bool):
    def field(v: np.ndarray) -> np.ndarray:
        frame = frame_at(spec, v, tol)
        parts = [induced_at(frame).flat()]
        if paracontact:
            xi, eta, phi, _ = paracontact_tensors(frame, tol)
            parts += [xi, eta, phi.ravel()]
        return np.concatenate(parts)

    return field


def local_geometry(
    spec: ImmersionSpec,
    u,
    tol: Tolerances = DEFAULT_TOL,
    paracontact: bool = True,
) -> LocalGeometry:
    u = np.asarray(u, dtype=float)
    m = spec.m
    frame = frame_at(spec, u, tol)
    objs = induced_at(frame)
    pc = paracontact_at(frame, tol) if paracontact else None

    field = _geometry_field(spec, tol, paracontact)
    box = (spec.lower, spec.upper)
    samples = [sample_field(field, u, i, box) for i in range(m)]
    D = np.stack([s.derivative() for s in samples])
    spread = max(s.spread() for s in samples)

    sizes = [m**3, m * m, m * m, m] + ([m, m, m * m] if paracontact else [])
    blocks = np.split(D, np.cumsum(sizes)[:-1], axis=1)
    extra = {}
    if paracontact:
        extra = {
            "d_xi": blocks[4],
            "d_eta": blocks[5],
            "d_phi": blocks[6].reshape(m, m, m),
        }
    return LocalGeometry(
        u=u,
        frame=frame,
        objs=objs,
        pc=pc,
        d_Gamma=blocks[0].reshape(m, m, m, m),
        d_h=blocks[1].reshape(m, m, m),
        d_S=blocks[2].reshape(m, m, m),
        d_tau=blocks[3],
        fd_spread=spread,
        **extra,
    )


# ──────────────────────────────────────────────────────────────────
# Covariant derivatives
# ──────────────────────────────────────────────────────────────────

NABLA_KINDS = ("phi", "eta", "xi", "h", "S")


def nabla(geo: LocalGeometry, kind: str) -> np.ndarray:
    """Coordinate components of ∇T, derivative direction first."""
    G = geo.objs.Gamma
    if kind == "h":
        h = geo.objs.h
        return geo.d_h - np.einsum("lij,lk->ijk", G, h) - np.einsum("lik,jl->ijk", G, h)
    if kind == "S":
        S = geo.objs.S
        return geo.d_S + np.einsum("kil,lj->ikj", G, S) - np.einsum("lij,kl->ikj", G, S)
    if kind not in NABLA_KINDS:
        raise ValueError(f"unknown tensor kind {kind!r}; expected one of {NABLA_KINDS}")
    pc = geo.require_paracontact()
    if kind == "phi":
        return (
            geo.d_phi
            + np.einsum("kil,lj->ikj", G, pc.phi)
            - np.einsum("lij,kl->ikj", G, pc.phi)
        )
    if kind == "eta":
        return geo.d_eta - np.einsum("lij,l->ij", G, pc.eta)
    return geo.d_xi + np.einsum("kil,l->ik", G, pc.xi)


def nabla_tensor_at(
    spec: ImmersionSpec,
    u,
    kind: str,
    tol: Tolerances = DEFAULT_TOL,
    geometry: LocalGeometry | None = None,
) -> np.ndarray:
    geo = geometry or local_geometry(spec, u, tol, paracontact=kind not in ("h", "S"))
    return nabla(geo, kind)


# ──────────────────────────────────────────────────────────────────
# Curvature and dτ
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class CurvatureTensor:
    """R(∂_i, ∂_j)∂_k = R[l, k, i, j] ∂_l."""

    R: np.ndarray

    def apply(self, X, Y, Z) -> np.ndarray:
        return np.einsum("lkij,i,j,k->l", self.R, X, Y, Z)

    def first_bianchi(self) -> np.ndarray:
        R = self.R
        return R + np.einsum("lijk->lkij", R) + np.einsum("ljki->lkij", R)


def curvature(geo: LocalGeometry) -> CurvatureTensor:
    G = geo.objs.Gamma
    # A[l,k,i,j] = ∂_i Γ^l_jk + Γ^l_im Γ^m_jk; antisymmetrizing keeps R exact in (i, j)
    A = np.einsum("iljk->lkij", geo.d_Gamma) + np.einsum("lim,mjk->lkij", G, G)
    return CurvatureTensor(A - A.swapaxes(2, 3))


def curvature_at(
    spec: ImmersionSpec,
    u,
    tol: Tolerances = DEFAULT_TOL,
    geometry: LocalGeometry | None = None,
) -> CurvatureTensor:
    return curvature(geometry or local_geometry(spec, u, tol, paracontact=False))


def first_bianchi_at(
    spec: ImmersionSpec,
    u,
    tol: Tolerances = DEFAULT_TOL,
    geometry: LocalGeometry | None = None,
) -> float:
    """Max |Σ_cyc R(X,Y)Z| over coordinate triples."""
    return float(np.abs(curvature_at(spec, u, tol, geometry).first_bianchi()).max())


def exterior_tau(geo: LocalGeometry) -> np.ndarray:
    """∂_i τ_j − ∂_j τ_i."""
    return geo.d_tau - geo.d_tau.T


def dtau_at(
    spec: ImmersionSpec,
    u,
    kappa: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
    geometry: LocalGeometry | None = None,
) -> np.ndarray:
    if kappa is None:
        kappa = calibrate_kappa().kappa
    geo = geometry or local_geometry(spec, u, tol, paracontact=False)
    return kappa * exterior_tau(geo)


def ricci_lhs(objs: InducedObjects) -> np.ndarray:
    """h(∂_i, S∂_j) − h(S∂_i, ∂_j)."""
    return objs.h @ objs.S - objs.S.T @ objs.h


# Paraboloid with a twisted transversal: τ = x dy, so dτ ≠ 0 and h is definite.
CALIBRATION_TEXT = """\
n 1
vars x y z
domain -1:1 -1:1 -1:1
f1 = x
f2 = y
f3 = z
f4 = (x^2 + y^2 + z^2) / 2
C1 = 0
C2 = x
C3 = 0
C4 = 1 + x * y
"""

KAPPA_CANDIDATES = (1.0, 0.5)


@dataclass(frozen=True)
class KappaCalibration:
    kappa: float
    residuals: tuple[tuple[float, float], ...]
    ambiguous: bool

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "residuals": {repr(k): r for k, r in self.residuals},
            "ambiguous": self.ambiguous,
        }


@lru_cache(maxsize=None)
def calibrate_kappa(points: int = 8, tol: float = 1e-6) -> KappaCalibration:
    """Pick the dτ factor κ for which h(X,SY) − h(SX,Y) = 2κ(∂τ antisym) holds."""
    spec = parse_immersion(CALIBRATION_TEXT, name="calibration")
    grid = make_grid(spec, points, seed=0)
    worst = dict.fromkeys(KAPPA_CANDIDATES, 0.0)
    for u in grid.points:
        geo = local_geometry(spec, u, paracontact=False)
        lhs, d = ricci_lhs(geo.objs), exterior_tau(geo)
        for k in KAPPA_CANDIDATES:
            worst[k] = max(worst[k], float(np.abs(lhs - 2.0 * k * d).max()))
    best = min(KAPPA_CANDIDATES, key=lambda k: worst[k])
    passing = [k for k in KAPPA_CANDIDATES if worst[k] < tol]
    ambiguous = len(passing) != 1
    if ambiguous:
        logger.warning("dτ calibration ambiguous: residuals %s", worst)
    else:
        logger.debug("dτ calibration picked kappa=%s (residuals %s)", best, worst)
    return KappaCalibration(best, tuple(worst.items()), ambiguous)


# ──────────────────────────────────────────────────────────────────
# Vector fields sampled with their first derivatives
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class VectorSample:
    """A vector field at a point: value[k] = X^k and jac[i, k] = ∂_i X^k."""

    value: np.ndarray
    jac: np.ndarray


def coordinate_field(p: int, m: int) -> VectorSample:
    value = np.zeros(m)
    value[p] = 1.0
    return VectorSample(value, np.zeros((m, m)))


def scaled_field(coeff: float, coeff_grad: np.ndarray, p: int, m: int) -> VectorSample:
    """a(u)∂_p given a(u) and its gradient."""
    value = np.zeros(m)
    value[p] = coeff
    jac = np.zeros((m, m))
    jac[:, p] = coeff_grad
    return VectorSample(value, jac)


def covariant(geo: LocalGeometry, X: VectorSample, Y: VectorSample) -> np.ndarray:
    """∇_X Y."""
    G = geo.objs.Gamma
    return X.value @ Y.jac + np.einsum("i,kil,l->k", X.value, G, Y.value)


def bracket(X: VectorSample, Y: VectorSample) -> np.ndarray:
    """[X, Y]^k = X^i ∂_i Y^k − Y^i ∂_i X^k."""
    return X.value @ Y.jac - Y.value @ X.jac


def phi_field(geo: LocalGeometry, Y: VectorSample) -> VectorSample:
    """φY with its derivatives."""
    pc = geo.require_paracontact()
    jac = np.einsum("ikl,l->ik", geo.d_phi, Y.value) + Y.jac @ pc.phi.T
    return VectorSample(pc.phi @ Y.value, jac)


def eta_of_field(geo: LocalGeometry, Y: VectorSample) -> tuple[float, np.ndarray]:
    """η(Y) and its gradient."""
    pc = geo.require_paracontact()
    return float(pc.eta @ Y.value), geo.d_eta @ Y.value + Y.jac @ pc.eta


def projector_derivative(geo: LocalGeometry, sign: int = 0) -> np.ndarray:
    """∂_i of φ² (sign 0) or of (φ² ± φ)/2, direction first."""
    phi = geo.require_paracontact().phi
    dD = np.einsum("ikl,lj->ikj", geo.d_phi, phi) + np.einsum("kl,ilj->ikj", phi, geo.d_phi)
    if sign == 0:
        return dD
    return (dD + sign * geo.d_phi) / 2.0


def projector_fields(geo: LocalGeometry, sign: int = 0) -> list[VectorSample]:
    """Smooth frames P∂_j of 𝒟 (sign 0), 𝒟⁺ (+1) or 𝒟⁻ (−1)."""
    pc = geo.require_paracontact()
    P = pc.projector_D if sign == 0 else pc.projector(sign)
    dP = projector_derivative(geo, sign)
    return [VectorSample(P[:, j].copy(), dP[:, :, j]) for j in range(geo.m)]
