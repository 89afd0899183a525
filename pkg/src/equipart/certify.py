"""Dual certificates and relative KKT residues for the convex SDPs.

Given a primal factor R, the diagonal dual lambda is recovered from the same
r x r solve that drives the tangent-space projection, applied to the ambient
cost gradient (L R for bisection, L R - 2 R Z for the penalized
equipartition problem).  The slack S = L - Diag(lambda) is only ever applied
as an implicit operator; its smallest centered eigenvalue gives the dual
residue, and complementarity is evaluated as <R, S R>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import center_apply, lanczos_min_eig, split_mask
from .variety import diag_multiplier


class NearSingularNormalEquations(RuntimeError):
    """Dual recovery refused: g_R g_R^* is numerically singular."""


@dataclass
class Certificate:
    """Recovered duals and relative KKT residues of one solve."""

    lam: np.ndarray  # dual for the diagonal constraints
    mu: np.ndarray  # dual for the zero-column-sum constraint
    rp: float
    rd: float
    rc: float
    eig_converged: bool = True
    eig_vector: np.ndarray | None = None  # eigendirection behind rd, when negative

    @property
    def max_residue(self):
        return max(self.rp, self.rd, self.rc)


@dataclass
class SolveReport:
    """Summary of a solve, embedded as-is in the CLI JSON output."""

    kind: str  # "bisect" or "equipart"
    n: int
    k: int
    r0: int
    r_final: int
    obj: float  # <L, R R^T>
    f: float  # obj / 2, the scale used by published reference tables
    rp: float
    rd: float
    rc: float
    inner_iterations: int
    outer_iterations: int
    escapes: int
    rank_drops: list = field(default_factory=list)
    wall_time: float = 0.0
    termination: str = ""
    seed: int = 0
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {
            "kind": self.kind,
            "n": self.n,
            "k": self.k,
            "r0": self.r0,
            "r_final": self.r_final,
            "obj": self.obj,
            "f": self.f,
            "rp": self.rp,
            "rd": self.rd,
            "rc": self.rc,
            "inner_iterations": self.inner_iterations,
            "outer_iterations": self.outer_iterations,
            "escapes": self.escapes,
            "rank_drops": [list(t) for t in self.rank_drops],
            "wall_time": self.wall_time,
            "termination": self.termination,
            "seed": self.seed,
            "flags": list(self.flags),
        }


def laplacian_fro_norm(L):
    return float(sp.linalg.norm(L)) if sp.issparse(L) else float(np.linalg.norm(L))


def _slack_apply(L, lam):
    def apply(x):
        if np.ndim(x) == 2:
            return L @ x - lam[:, None] * x
        return L @ x - lam * x

    return apply


def residues_bisection(point, L, tol_eig=1e-9, seed=0, lam=None):
    """Relative KKT residues of X = R R^T for the bisection SDP.

    ``lam`` overrides the recovered diagonal dual; this is how certificates
    at exact rank-one optima (where the tangent solve is singular) are
    evaluated.
    """
    R = point.R
    n = point.n
    if lam is None:
        lam = diag_multiplier(point, L @ R)
    lam = np.asarray(lam, dtype=float)
    Lfro = laplacian_fro_norm(L)
    S = _slack_apply(L, lam)

    row_err = np.einsum("ij,ij->i", R, R) - 1.0
    rp = float(np.linalg.norm(row_err)) / (1.0 + np.sqrt(n))
    SR = S(R)
    rc = abs(float(np.sum(R * SR))) / (1.0 + Lfro)
    mu = (L @ R - lam[:, None] * R).T @ np.ones(n) / n

    def jsj(x):
        return center_apply(S(center_apply(x)))

    eig = lanczos_min_eig(jsj, n, tol=tol_eig, seed=seed)
    rd = max(0.0, -eig.value) / (1.0 + Lfro)
    return Certificate(
        lam=lam, mu=mu, rp=rp, rd=rd, rc=rc, eig_converged=eig.converged, eig_vector=eig.vector
    )


def residues_equipartition(point, Z, L, alpha, tol_eig=1e-9, seed=0, tau_alpha=1e-6):
    """Relative KKT residues for the spectrally bounded equipartition SDP.

    The dual slack is deflated on the singular block U1 sitting at the bound
    sqrt(alpha): the dual residue combines lambda_max(U1^T S U1) with the
    smallest centered eigenvalue of the deflated operator.
    """
    R = point.R
    n = point.n
    lam = diag_multiplier(point, L @ R - 2.0 * (R @ Z))
    Lfro = laplacian_fro_norm(L)
    S = _slack_apply(L, lam)

    row_err = np.einsum("ij,ij->i", R, R) - 1.0
    rp = max(float(np.linalg.norm(row_err)) / (1.0 + np.sqrt(n)), point.spectral_norm - np.sqrt(alpha))
    mu = (L @ R - lam[:, None] * R).T @ np.ones(n) / n

    mask = split_mask(point.svd, alpha, tau_alpha)
    U1 = point.svd.U[:, mask]
    k1 = U1.shape[1]
    SR = S(R)
    if k1 == 0:
        rc = abs(float(np.sum(R * SR))) / (1.0 + Lfro)

        def op(x):
            return center_apply(S(center_apply(x)))

        eig = lanczos_min_eig(op, n, tol=tol_eig, seed=seed)
        rd = max(0.0, -eig.value) / (1.0 + Lfro)
        return Certificate(
            lam=lam, mu=mu, rp=rp, rd=rd, rc=rc, eig_converged=eig.converged, eig_vector=eig.vector
        )

    SU1 = S(U1)
    M1 = 0.5 * (U1.T @ SU1 + SU1.T @ U1)
    lam_max_block = float(np.linalg.eigvalsh(M1)[-1])
    U1R = U1.T @ R
    rc = abs(float(np.sum(R * SR)) - float(np.sum(M1 * (U1R @ U1R.T)))) / (1.0 + Lfro)

    def deflated(x):
        y = center_apply(x)
        w = S(y) - U1 @ (M1 @ (U1.T @ y))
        return center_apply(w)

    eig = lanczos_min_eig(deflated, n, tol=tol_eig, seed=seed)
    rd = max(lam_max_block, max(0.0, -eig.value)) / (1.0 + Lfro)
    return Certificate(
        lam=lam, mu=mu, rp=rp, rd=rd, rc=rc, eig_converged=eig.converged, eig_vector=eig.vector
    )


def recover_duals(point, theta, c_eff, max_cond=1e12):
    """Least-squares dual recovery (y, z) from g_R g_R^*(y, z) = g_R(C R + Theta).

    g_R(H) = (diag(H R^T), H^T e) and g_R^*(y, z) = diag(y) R + e z^T; the
    normal equations reduce to the r x r system (n I - R^T R) z = q - R^T p.
    """
    R = point.R
    n = point.n
    target = np.asarray(c_eff, dtype=float) + (np.asarray(theta, dtype=float) if theta is not None else 0.0)
    p = np.einsum("ij,ij->i", target, R)
    q = target.T @ np.ones(n)
    A = n * np.eye(point.r) - R.T @ R
    w = np.linalg.eigvalsh(A)
    if w[0] <= 0 or w[-1] / w[0] > max_cond:
        raise NearSingularNormalEquations(
            f"normal equations have condition {w[-1] / max(w[0], 1e-300):.2e}"
        )
    z = np.linalg.solve(A, q - R.T @ p)
    y = p - R @ z
    return y, z
