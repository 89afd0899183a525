"""Augmented Lagrangian solver for the spectrally bounded equipartition SDP.

For k >= 3 the factorized problem adds the bound ||R||_2 <= sqrt(alpha) with
alpha = n / (k - 1) to the variety constraints.  Feasible points are then
always smooth (a rank-one point would need spectral norm sqrt(n)), so the
bound is the only constraint that needs a multiplier: the reduced augmented
Lagrangian penalizes the r x r matrix constraint R^T R <= alpha I with an NSD
multiplier Z, and each subproblem is solved by the same Riemannian BB descent
used for bisection.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .bisection import BBConfig, default_rank, random_feasible_point, rank_adapt, solve_smooth
from .certify import SolveReport, residues_equipartition
from .linalg import project_nsd, project_psd
from .variety import project_tangent


@dataclass(frozen=True)
class ALMConfig:
    """Outer-loop and subproblem parameters of the augmented Lagrangian."""

    inner_tol: float = 1e-6  # relative Riemannian gradient accuracy of subproblems
    inner_max_iter: int = 200
    beta0: float = 0.1
    beta_min: float = 0.1
    beta_max: float = 10.0
    tol: float = 1e-6
    max_outer: int = 1000
    seed: int = 0
    stall_limit: int = 100
    # off by default: with an active spectral bound the optimal spectrum
    # spreads across many equal singular values, and truncating on an early
    # transient gap can strand the run on a too-narrow factor (the dual
    # residue exposes this, but avoiding it is better than detecting it)
    rank_adapt_period: int = 0
    rank_adapt_ratio: float = 10.0


class ALMObjective:
    """Reduced augmented Lagrangian L_beta(R, Z) and its Euclidean gradient."""

    def __init__(self, L, Z, beta, alpha):
        self.L = L
        self.Z = np.asarray(Z, dtype=float)
        self.beta = float(beta)
        self.alpha = float(alpha)
        self._z_norm_sq = float(np.sum(self.Z * self.Z))

    def _shifted_projection(self, R):
        G = R.T @ R
        W = self.Z - self.beta * (G - self.alpha * np.eye(R.shape[1]))
        return project_nsd(W)

    def value(self, R):
        P = self._shifted_projection(R)
        f = 0.5 * float(np.sum(R * (self.L @ R)))
        return f + (float(np.sum(P * P)) - self._z_norm_sq) / (2.0 * self.beta)

    def egrad(self, R):
        P = self._shifted_projection(R)
        return self.L @ R - 2.0 * (R @ P)


def aug_lagrangian_value(R, Z, beta, L, alpha):
    """L_beta(R, Z) for an arbitrary n x r matrix R (feasibility not required)."""
    if beta <= 0:
        raise ValueError("penalty beta must be positive")
    R = R.R if hasattr(R, "R") else np.asarray(R, dtype=float)
    return ALMObjective(L, Z, beta, alpha).value(R)


def aug_lagrangian_grad(R, Z, beta, L, alpha):
    """Euclidean gradient of L_beta; project with the variety tangent map for
    the Riemannian gradient."""
    if beta <= 0:
        raise ValueError("penalty beta must be positive")
    R = R.R if hasattr(R, "R") else np.asarray(R, dtype=float)
    return ALMObjective(L, Z, beta, alpha).egrad(R)


def recover_slack_Y(point, alpha):
    """PSD slack Y = Pi_+(alpha I - R^T R) of the spectral bound."""
    R = point.R if hasattr(point, "R") else np.asarray(point, dtype=float)
    G = R.T @ R
    return project_psd(alpha * np.eye(R.shape[1]) - G)


def _kick_along(point, direction, rng, scales=(0.05, 0.2, 0.5)):
    """Move a stalled iterate into an ambient descent direction u by adding
    u q^T with q taken from the orthogonal complement of the row space (or
    the weakest right-singular direction when the factor has full rank)."""
    from scipy.linalg import null_space

    from .variety import try_project

    if direction is None:
        direction = rng.standard_normal(point.n)
    u = direction / np.linalg.norm(direction)
    V = point.svd.V
    comp = null_space(V.T) if V.shape[1] < point.r else None
    q = comp[:, 0] if comp is not None and comp.size else V[:, -1]
    for eta in scales:
        cand = try_project(point.R + eta * np.outer(u, q))
        if cand is not None:
            return cand
    return point


def _kick_off_singular(point, rng, margin=1e-6):
    """Projected random perturbation moving a near-rank-one iterate to a point
    where the tangent-space solve is well conditioned again."""
    from .variety import try_project

    n = point.n
    for eta in (0.02, 0.1, 0.5, 2.0):
        cand = try_project(point.R + eta * rng.standard_normal(point.R.shape))
        if cand is None:
            continue
        s = cand.svd.s
        if s.size >= 2 and s[0] ** 2 <= (1.0 - margin) * n:
            return cand
    return point


def _feasibilities(point, Z, L, alpha):
    R = point.R
    G = R.T @ R
    eye = np.eye(point.r)
    Y = project_psd(alpha * eye - G)
    y_norm = float(np.linalg.norm(Y))
    z_norm = float(np.linalg.norm(Z))
    viol = project_psd(G - alpha * eye)
    pfeas = float(np.linalg.norm(viol)) / (1.0 + point.n + y_norm)
    grad = L @ R - 2.0 * (R @ Z)
    stat = project_tangent(point, grad).norm() / (1.0 + np.sqrt(point.n) + z_norm)
    comp = float(np.linalg.norm(Y - project_psd(Y + Z))) / (1.0 + y_norm + z_norm)
    return pfeas, max(stat, comp), Y


def solve_equipartition(L, k, cfg=None, r=None, start=None):
    """Solve the factorized k-equipartition SDP (k >= 3) by the ALM.

    Returns (SolveReport, VarietyPoint, Z).  The multiplier update keeps
    Z negative semidefinite; the penalty moves within [beta_min, beta_max]
    driven by the primal/dual feasibility balance, and the run stops early
    with a flag when neither feasibility improves for ``stall_limit`` outer
    iterations.
    """
    cfg = cfg or ALMConfig()
    if k < 3:
        raise ValueError("the ALM path handles k >= 3; use solve_bisection for k = 2")
    t0 = time.perf_counter()
    n = L.shape[0]
    if n % k != 0:
        warnings.warn(f"k={k} does not divide n={n}; solving the relaxation anyway", stacklevel=2)
    alpha = n / (k - 1)
    r0 = r if r is not None else default_rank(n, k)
    rng = np.random.default_rng(cfg.seed)

    inner_cfg = BBConfig(
        tol=cfg.inner_tol,
        max_iter=cfg.inner_max_iter,
        seed=cfg.seed,
        rank_adapt_period=0,  # widths are frozen during a subproblem; Z is r x r
    )

    point = start if start is not None else random_feasible_point(n, r0, rng)
    Z = np.zeros((point.r, point.r))
    beta = cfg.beta0
    inner_total = 0
    outer_total = 0
    rank_drops = []
    flags = []
    termination = "max_outer"
    cert = None

    for attempt in range(3):
        best_feas = np.inf
        stall = 0
        termination = "max_outer"
        for outer in range(1, cfg.max_outer + 1):
            objective = ALMObjective(L, Z, beta, alpha)
            res = solve_smooth(objective, point, inner_cfg, delta=None)
            inner_total += res.iterations
            outer_total += 1
            point = res.point

            if res.status == "near_singular":
                # a weakly penalized subproblem drifted towards a rank-one
                # point, where the tangent solve degenerates; move off the
                # singular set and let the pfeas rule keep raising beta
                if "near_singular_iterate" not in flags:
                    flags.append("near_singular_iterate")
                point = _kick_off_singular(point, rng)

            G = point.R.T @ point.R
            Z = project_nsd(Z - beta * (G - alpha * np.eye(point.r)))
            pfeas, dfeas, _Y = _feasibilities(point, Z, L, alpha)

            if max(pfeas, dfeas) < best_feas * 0.999:
                best_feas = max(pfeas, dfeas)
                stall = 0
            else:
                stall += 1

            if pfeas <= cfg.tol and dfeas <= cfg.tol:
                termination = "converged"
                break
            if stall >= cfg.stall_limit:
                termination = "stalled"
                flags.append("stalled")
                break

            if pfeas < dfeas / 1000.0:
                beta = max(beta / 1.2, cfg.beta_min)
            elif pfeas >= max(dfeas / 1000.0, 10.0 * cfg.tol):
                beta = min(1.2 * beta, cfg.beta_max)

            if cfg.rank_adapt_period > 0 and outer % cfg.rank_adapt_period == 0 and point.r > 2:
                adapted = rank_adapt(point, ratio=cfg.rank_adapt_ratio)
                if adapted is not point and adapted.r < point.r:
                    keep = adapted.r
                    V = point.svd.V[:, :keep]
                    Z = project_nsd(V.T @ Z @ V)
                    rank_drops.append((outer, point.r, keep))
                    point = adapted

        cert = residues_equipartition(point, Z, L, alpha, seed=cfg.seed)
        if termination != "converged" or cert.rd <= 10.0 * cfg.tol or attempt == 2:
            break
        # converged by the inner measures but the convex dual certificate
        # failed: the iterate is a spurious rank-deficient stationary point;
        # the negative eigendirection of the deflated slack opens a strict
        # second-order descent, so kick into it and continue
        flags.append("dual_certificate_restart")
        point = _kick_along(point, cert.eig_vector, rng)

    obj = point.objective(L)
    report = SolveReport(
        kind="equipart",
        n=n,
        k=k,
        r0=r0,
        r_final=point.r,
        obj=obj,
        f=0.5 * obj,
        rp=cert.rp,
        rd=cert.rd,
        rc=cert.rc,
        inner_iterations=inner_total,
        outer_iterations=outer_total,
        escapes=0,
        rank_drops=rank_drops,
        wall_time=time.perf_counter() - t0,
        termination=termination,
        seed=cfg.seed,
        flags=flags,
    )
    return report, point, Z
