"""Moving frame, Gauss/Weingarten decomposition and the induced paracontact triple.

Index conventions used throughout the package:

    Gamma[k, i, j]   Γ^k_ij, the ∂_k-component of ∇_{∂_i}∂_j
    h[i, j]          h(∂_i, ∂_j)
    S[k, i]          S∂_i = S^k_i ∂_k
    tau[i]           τ(∂_i)
    phi[k, j]        φ∂_j = φ^k_j ∂_k
    eta[j], xi[k]

Tangent vectors are coordinate columns of length m = 2n+1; ambient vectors
have length 2n+2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import null_space, orth

from .config import Tolerances
from .errors import (
    EigensplitError,
    FrameError,
    NotJTangentError,
    OutsideDomainError,
    RankDeficiencyError,
    TransversalityError,
)
from .exprlang import ImmersionSpec, eval_components

logger = logging.getLogger(__name__)

DEFAULT_TOL = Tolerances()


def para_apply(v: np.ndarray, axis: int = 0) -> np.ndarray:
    """J̃: swap the two halves of the ambient coordinates along ``axis``."""
    v = np.asarray(v, dtype=float)
    dim = v.shape[axis]
    if dim % 2:
        raise FrameError(f"para-complex structure needs an even dimension, got {dim}")
    return np.roll(v, dim // 2, axis=axis)


def _relative_rank(mat: np.ndarray, rtol: float) -> tuple[int, np.ndarray]:
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0, s
    return int(np.sum(s > rtol * s[0])), s


# ──────────────────────────────────────────────────────────────────
# Frame
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class FrameData:
    u: np.ndarray
    f_val: np.ndarray
    F: np.ndarray  # (dim, m), columns f_{x_i}
    f_second: np.ndarray  # (m, m, dim), f_second[i, j] = f_{x_i x_j}
    C_val: np.ndarray
    dC: np.ndarray  # (dim, m), columns ∂_{x_i}C

    @property
    def m(self) -> int:
        return self.F.shape[1]

    @property
    def n(self) -> int:
        return (self.m - 1) // 2

    @cached_property
    def A(self) -> np.ndarray:
        """[F | C]; invertible exactly when C is transversal."""
        return np.column_stack([self.F, self.C_val])


def _require_in_domain(spec: ImmersionSpec, u: np.ndarray) -> None:
    # slack absorbs the rounding of stencil points placed on the boundary
    slack = 1e-12 * (1.0 + np.maximum(np.abs(spec.lower), np.abs(spec.upper)))
    outside = np.flatnonzero(~((u >= spec.lower - slack) & (u <= spec.upper + slack)))
    if outside.size:
        i = int(outside[0])
        lo, hi = spec.domain_box[i]
        raise OutsideDomainError(
            f"coordinate {spec.var_names[i]} = {float(u[i])!r} is outside the domain {lo}:{hi}", u
        )


def frame_at(spec: ImmersionSpec, u, tol: Tolerances = DEFAULT_TOL) -> FrameData:
    u = np.asarray(u, dtype=float)
    if u.shape != (spec.m,):
        raise FrameError(f"point has {u.size} coordinates, expected {spec.m}")
    _require_in_domain(spec, u)
    f_jets = eval_components(spec.f_components, u)
    c_jets = eval_components(spec.c_components, u)

    F = np.array([j.grad for j in f_jets])
    f_second = np.stack([j.hess for j in f_jets], axis=-1)
    frame = FrameData(
        u=u,
        f_val=np.array([j.value for j in f_jets]),
        F=F,
        f_second=f_second,
        C_val=np.array([j.value for j in c_jets]),
        dC=np.array([j.grad for j in c_jets]),
    )

    rank, s = _relative_rank(F, tol.rank)
    if rank < spec.m:
        raise RankDeficiencyError(
            f"Jacobian of f has rank {rank} < {spec.m} (singular values {s.tolist()})", u
        )
    rank, s = _relative_rank(frame.A, tol.rank)
    if rank < spec.dim:
        raise TransversalityError("C is not transversal: [F | C] is singular", u)
    return frame


# ──────────────────────────────────────────────────────────────────
# Induced affine objects
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class InducedObjects:
    Gamma: np.ndarray
    h: np.ndarray
    S: np.ndarray
    tau: np.ndarray
    residual: float = 0.0

    def flat(self) -> np.ndarray:
        return np.concatenate([self.Gamma.ravel(), self.h.ravel(), self.S.ravel(), self.tau])


def induced_at(frame: FrameData) -> InducedObjects:
    """Solve D_{∂i}f_*∂_j = f_*(∇_{∂i}∂_j) + h_ij C and D_{∂i}C = -f_*(S∂_i) + τ_i C."""
    m, dim = frame.m, frame.F.shape[0]
    rhs_gauss = frame.f_second.reshape(m * m, dim).T
    rhs = np.column_stack([rhs_gauss, frame.dC])
    try:
        sol = np.linalg.solve(frame.A, rhs)
    except np.linalg.LinAlgError as exc:
        raise TransversalityError(f"Gauss/Weingarten solve failed: {exc}", frame.u)

    X, Y = sol[:, : m * m], sol[:, m * m :]
    Gamma = X[:m].reshape(m, m, m)
    Gamma = (Gamma + Gamma.swapaxes(1, 2)) / 2.0
    h = X[m].reshape(m, m)
    h = (h + h.T) / 2.0

    recon = np.einsum("ak,kij->ija", frame.F, Gamma) + h[:, :, None] * frame.C_val
    scale = 1.0 + np.abs(frame.f_second).max()
    residual = float(np.abs(recon - frame.f_second).max() / scale)
    return InducedObjects(Gamma=Gamma, h=h, S=-Y[:m], tau=Y[m].copy(), residual=residual)


# ──────────────────────────────────────────────────────────────────
# Paracontact structure
# ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class ParacontactFrame:
    xi: np.ndarray
    eta: np.ndarray
    phi: np.ndarray
    basis_D: np.ndarray  # (m, 2n) columns
    basis_Dp: np.ndarray  # (m, n)
    basis_Dm: np.ndarray  # (m, n)
    jtangency_residual: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def projector_D(self) -> np.ndarray:
        """φ², the projection onto 𝒟 along ξ."""
        return self.phi @ self.phi

    def projector(self, sign: int) -> np.ndarray:
        """(φ² ± φ)/2, the projection onto 𝒟^± along the other summands."""
        return (self.projector_D + sign * self.phi) / 2.0

    def flat(self) -> np.ndarray:
        return np.concatenate([self.xi, self.eta, self.phi.ravel()])


def jtangency(frame: FrameData) -> tuple[np.ndarray, float]:
    """Least-squares ξ with Fξ ≈ J̃C and the relative residual of that fit."""
    target = para_apply(frame.C_val)
    xi, *_ = np.linalg.lstsq(frame.F, target, rcond=None)
    norm = max(np.linalg.norm(target), np.finfo(float).tiny)
    return xi, float(np.linalg.norm(frame.F @ xi - target) / norm)


def paracontact_tensors(
    frame: FrameData, tol: Tolerances = DEFAULT_TOL
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """ξ, η, φ and the J̃-tangency residual, without the distribution bases."""
    xi, residual = jtangency(frame)
    if residual > tol.rank:
        raise NotJTangentError(
            f"J̃C is not tangent (relative residual {residual:.3e}); C is not J̃-tangent",
            frame.u,
        )
    # J̃f_*X = f_*(φX) + η(X)C, one column per coordinate field
    M = np.linalg.solve(frame.A, para_apply(frame.F, axis=0))
    m = frame.m
    return xi, M[m].copy(), M[:m], residual


def paracontact_at(frame: FrameData, tol: Tolerances = DEFAULT_TOL) -> ParacontactFrame:
    xi, eta, phi, residual = paracontact_tensors(frame, tol)

    basis_D = null_space(eta[None, :], rcond=tol.rank)
    n = frame.n
    if basis_D.shape[1] != 2 * n:
        raise EigensplitError(f"ker η has dimension {basis_D.shape[1]}, expected {2 * n}", frame.u)

    splits = []
    for sign, label in ((1, "+"), (-1, "-")):
        image = (basis_D + sign * (phi @ basis_D)) / 2.0
        basis = orth(image, rcond=tol.rank)
        if basis.shape[1] != n:
            raise EigensplitError(
                f"𝒟{label} has dimension {basis.shape[1]}, expected {n}", frame.u
            )
        splits.append(basis)

    return ParacontactFrame(
        xi=xi,
        eta=eta,
        phi=phi,
        basis_D=basis_D,
        basis_Dp=splits[0],
        basis_Dm=splits[1],
        jtangency_residual=residual,
    )


def structure_residuals(pc: ParacontactFrame) -> dict[str, float]:
    """Algebraic identities of an almost paracontact structure, max-abs each."""
    m = pc.xi.size
    eye = np.eye(m)
    return {
        "eta_xi": abs(float(pc.eta @ pc.xi) - 1.0),
        "phi_squared": float(np.abs(pc.phi @ pc.phi - (eye - np.outer(pc.xi, pc.eta))).max()),
        "phi_xi": float(np.abs(pc.phi @ pc.xi).max()),
        "eta_phi": float(np.abs(pc.eta @ pc.phi).max()),
        "phi_on_Dp": float(np.abs(pc.phi @ pc.basis_Dp - pc.basis_Dp).max()),
        "phi_on_Dm": float(np.abs(pc.phi @ pc.basis_Dm + pc.basis_Dm).max()),
    }


# ──────────────────────────────────────────────────────────────────
# Euclidean normal
# ──────────────────────────────────────────────────────────────────


def euclidean_normal_at(
    frame: FrameData, tol: Tolerances = DEFAULT_TOL
) -> tuple[np.ndarray, bool, float]:
    """Unit Euclidean normal on the side of C, and whether J̃N is tangent."""
    N = null_space(frame.F.T)[:, 0]
    if N @ frame.C_val < 0:
        N = -N
    JN = para_apply(N)
    coef, *_ = np.linalg.lstsq(frame.F, JN, rcond=None)
    residual = float(np.linalg.norm(frame.F @ coef - JN))
    return N, residual < tol.rank, residual
