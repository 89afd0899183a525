"""Riemannian Barzilai-Borwein solver for the factorized bisection SDP.

The smooth phase minimizes f(R) = <L, R R^T> / 2 over the variety with BB
steps, a nonmonotone line search whose trial points are full metric
projections of R - tau g, and a periodic rank-reduction check.  Whenever an
iterate drifts into the near-singular region (top singular value within a
delta margin of sqrt(n)) it is rounded to an exact sign pattern; the rounded
point is either certified globally optimal or escaped along a second-order
descent curve, and the margin delta is halved after every such event.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import escape as escape_mod
from .certify import SolveReport, residues_bisection
from .variety import (
    NearSingularError,
    RetractionError,
    VarietyPoint,
    is_singular,
    project_tangent,
    round_to_singular,
    try_project,
)

LS_MAX_HALVINGS = 60


@dataclass(frozen=True)
class BBConfig:
    """Parameters of the BB solver and the outer singularity handling."""

    gamma: float = 1e-4  # sufficient decrease constant
    eps_bb: float = 1e-10  # BB step clamp: alpha must lie in [eps, 1/eps]
    sigma_ls: float = 0.5  # line-search backtracking factor
    M: int = 5  # nonmonotone memory
    tol: float = 1e-6  # relative Riemannian gradient tolerance
    max_iter: int = 20000
    seed: int = 0
    delta0: float = 0.02  # initial near-singular margin
    bb_variant: str = "BB1"
    rank_adapt_period: int = 10
    rank_adapt_ratio: float = 10.0
    max_outer_events: int = 60

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 < self.sigma_ls < 1:
            raise ValueError("sigma_ls must lie in (0, 1)")
        if self.M < 0:
            raise ValueError("nonmonotone memory M must be >= 0")
        if not 0 < self.delta0 < 0.5:
            raise ValueError("delta0 must lie in (0, 1/2)")
        if self.bb_variant not in ("BB1", "BB2"):
            raise ValueError("bb_variant must be 'BB1' or 'BB2'")


def default_rank(n, k):
    """Factor width k - 1 + ceil(sqrt(2 (n + 1))) from the rank bound."""
    if n < 2 or k < 2:
        raise ValueError("need n >= 2 and k >= 2")
    if n % k != 0:
        warnings.warn(f"k={k} does not divide n={n}; the relaxation is still solvable", stacklevel=2)
    v = 2 * (n + 1)
    s = math.isqrt(v)
    return k - 1 + (s if s * s == v else s + 1)


def bb_fallback_alpha(gnorm):
    """Safeguard inverse step keyed on the gradient norm."""
    if gnorm > 1.0:
        return 1.0
    if gnorm >= 1e-5:
        return 1.0 / gnorm
    return 1e5


def bb_step(g, y, tau_prev, variant="BB1"):
    """BB inverse step from the current gradient g and gradient change y.

    Both quotients are normalized by tau_prev <g, g>, which the caller clamps
    to [eps, 1/eps] before inverting.
    """
    g = g.H if hasattr(g, "H") else g
    y = y.H if hasattr(y, "H") else y
    gg = float(np.sum(g * g))
    if gg <= 0:
        raise ValueError("bb_step needs a nonzero gradient")
    if variant == "BB1":
        return abs(float(np.sum(g * y))) / (tau_prev * gg)
    if variant == "BB2":
        return float(np.sum(y * y)) / (tau_prev * gg)
    raise ValueError(f"unknown BB variant {variant!r}")


def random_feasible_point(n, r, rng, max_draws=10):
    """Projection of a Gaussian matrix onto the variety, redrawing on failure."""
    for _ in range(max_draws):
        cand = try_project(rng.standard_normal((n, r)))
        if cand is not None:
            return cand
    raise RetractionError(f"could not project a random start onto the variety in {max_draws} draws")


class BisectionObjective:
    """f(R) = <L, R R^T> / 2 with Euclidean gradient L R."""

    def __init__(self, L):
        self.L = L

    def value(self, R):
        return 0.5 * float(np.sum(R * (self.L @ R)))

    def egrad(self, R):
        return self.L @ R


@dataclass
class SmoothResult:
    status: str  # converged | hit_singular | near_singular | max_iter | line_search_failed
    point: VarietyPoint
    f: float
    grad_rel: float
    iterations: int
    rank_drops: list = field(default_factory=list)
    f_trace: list = field(default_factory=list)


def solve_smooth(objective, start, cfg, delta=None, max_iter=None):
    """Riemannian gradient BB descent with nonmonotone line search.

    Line-search trial points are metric projections of R - tau g; a failed
    projection (geometric median at a vertex) just shrinks tau.  With
    ``delta`` set, returns ``hit_singular`` as soon as an accepted iterate
    enters the near-singular region.  Every accepted iterate satisfies
    f(R) <= f(start).
    """
    point = start
    budget = cfg.max_iter if max_iter is None else max_iter
    f = objective.value(point.R)
    hist = [f]
    trace = [f]
    rank_drops = []
    sqrt_n = np.sqrt(point.n)

    if delta is not None and is_singular(point, delta):
        return SmoothResult("hit_singular", point, f, np.inf, 0, rank_drops, trace)

    prev_grad = None  # ambient matrix of the previous Riemannian gradient
    alpha = None
    grad_rel = np.inf

    for it in range(max(budget, 0)):
        try:
            g = project_tangent(point, objective.egrad(point.R))
        except NearSingularError:
            status = "hit_singular" if delta is not None else "near_singular"
            return SmoothResult(status, point, f, np.inf, it, rank_drops, trace)
        gg = g.inner(g)
        gnorm = np.sqrt(gg)
        grad_rel = gnorm / (1.0 + sqrt_n)
        if grad_rel < cfg.tol or gnorm == 0.0:
            return SmoothResult("converged", point, f, grad_rel, it, rank_drops, trace)

        if prev_grad is not None and alpha is not None:
            if alpha <= cfg.eps_bb or alpha >= 1.0 / cfg.eps_bb:
                alpha = bb_fallback_alpha(gnorm)
        else:
            alpha = bb_fallback_alpha(gnorm)

        tau = 1.0 / alpha
        accepted = False
        envelope = max(hist)
        for _ls in range(LS_MAX_HALVINGS):
            cand = try_project(point.R - tau * g.H)
            if cand is not None:
                f_cand = objective.value(cand.R)
                if f_cand <= envelope - cfg.gamma * tau * gg:
                    accepted = True
                    break
            tau *= cfg.sigma_ls
        if not accepted:
            return SmoothResult("line_search_failed", point, f, grad_rel, it, rank_drops, trace)

        # BB scalar for the next iteration, from gradients at the point just left
        if prev_grad is not None:
            y = g.H - project_tangent(point, prev_grad).H
            alpha = bb_step(g.H, y, tau, cfg.bb_variant)
        else:
            alpha = bb_fallback_alpha(gnorm)
        prev_grad = g.H
        point = cand
        f = f_cand
        hist.append(f)
        if len(hist) > cfg.M + 1:
            hist.pop(0)
        trace.append(f)

        if delta is not None and is_singular(point, delta):
            return SmoothResult("hit_singular", point, f, grad_rel, it + 1, rank_drops, trace)

        if cfg.rank_adapt_period > 0 and (it + 1) % cfg.rank_adapt_period == 0 and point.r > 2:
            adapted = rank_adapt(point, ratio=cfg.rank_adapt_ratio)
            if adapted is not point:
                f_adapt = objective.value(adapted.R)
                if f_adapt <= max(hist):
                    rank_drops.append((it + 1, point.r, adapted.r))
                    point = adapted
                    f = f_adapt
                    hist.append(f)
                    if len(hist) > cfg.M + 1:
                        hist.pop(0)
                    trace.append(f)
                    prev_grad = None  # widths changed; restart the BB memory
                    alpha = None

    return SmoothResult("max_iter", point, f, grad_rel, budget, rank_drops, trace)


def rank_adapt(point, period=10, ratio=10.0):
    """Truncate the factor at the largest singular-value gap above ``ratio``.

    ``period`` is the scheduling hint honoured by the solver loops (a check
    every that many accepted steps); the truncation itself keeps at least two
    columns and re-projects onto the variety, returning the input point
    unchanged when no gap qualifies or the re-projection fails.
    """
    s = point.svd.s
    if s.size <= 2:
        return point
    denom = np.where(s[1:] > 0, s[1:], np.inf)
    ratios = np.where(s[1:] > 0, s[:-1] / denom, np.inf)
    ratios = np.where(s[:-1] > 0, ratios, 0.0)
    if not np.any(ratios > ratio):
        return point
    j = int(np.argmax(ratios))  # first index attains the max on ties
    keep = max(2, j + 1)
    if keep >= s.size and point.r <= s.size:
        return point
    truncated = point.svd.U[:, :keep] * s[:keep]
    projected = try_project(truncated)
    if projected is None:
        return point
    return projected


def solve_bisection(L, cfg=None, r=None, start=None):
    """Solve the factorized minimum-bisection SDP with certification.

    Parameters
    ----------
    L : sparse or dense symmetric Laplacian.
    cfg : BBConfig
    r : int, optional
        Factor width override; defaults to the rank bound for k = 2.
    start : VarietyPoint, optional
        Warm start; defaults to a projected random Gaussian factor.

    Returns
    -------
    (SolveReport, VarietyPoint or SingularPoint)
    """
    cfg = cfg or BBConfig()
    t0 = time.perf_counter()
    n = L.shape[0]
    r0 = r if r is not None else default_rank(n, 2)
    rng = np.random.default_rng(cfg.seed)
    objective = BisectionObjective(L)

    point = start if start is not None else random_feasible_point(n, r0, rng)
    delta = cfg.delta0
    escapes = 0
    outer_events = 0
    inner_total = 0
    rank_drops = []
    flags = []
    termination = "max_outer_events"
    certificate = None
    final = None

    while outer_events <= cfg.max_outer_events:
        res = solve_smooth(objective, point, cfg, delta=delta, max_iter=cfg.max_iter - inner_total)
        inner_total += res.iterations
        rank_drops.extend(res.rank_drops)
        point = res.point

        if res.status == "converged":
            termination = "converged"
            final = point
            break
        if res.status in ("max_iter", "line_search_failed"):
            termination = res.status
            flags.append(res.status)
            final = point
            break

        # near-singular iterate: round and decide
        outer_events += 1
        sigma1 = point.spectral_norm
        delta_round = max(delta, min(0.49, 1.0 - sigma1 * sigma1 / n + 1e-12))
        a = round_to_singular(point, delta_round)
        if a is None:
            delta *= 0.5  # not a variety sign pattern; tighten the margin and resume
            continue

        outcome = escape_mod.certify_or_direction(a, L, point.r, tol=1e-8, seed=cfg.seed + outer_events)
        if outcome.kind == "optimal" and outcome.verified:
            termination = "certified_singular"
            final = a.as_factor(point.r)
            certificate = residues_bisection(final, L, seed=cfg.seed, lam=outcome.mu)
            break
        if outcome.kind == "optimal":
            # value says optimal but the dual check failed; continue descending
            flags.append("unverified_singular_certificate")
            delta *= 0.5
            continue

        f_hat = objective.value(point.R)
        f_sing = 0.5 * float(a.a @ (L @ a.a))
        try:
            cand, f_new, _t = escape_mod.escape_step(a, outcome.direction, L, f_sing)
        except RuntimeError:
            flags.append("escape_step_failed")
            delta *= 0.5
            continue
        escapes += 1
        if f_new < f_hat:
            point = cand
        delta *= 0.5

    if final is None:
        final = point
        flags.append("outer_event_budget_exhausted")

    if certificate is None:
        try:
            certificate = residues_bisection(final, L, seed=cfg.seed)
        except NearSingularError:
            certificate = None
            flags.append("residues_unavailable_near_singular")

    if isinstance(final, VarietyPoint):
        obj = final.objective(L)
        r_final = final.r
    else:  # pragma: no cover - final is always a VarietyPoint here
        obj = float(final.a @ (L @ final.a))
        r_final = 1

    report = SolveReport(
        kind="bisect",
        n=n,
        k=2,
        r0=r0,
        r_final=r_final,
        obj=obj,
        f=0.5 * obj,
        rp=certificate.rp if certificate else float("nan"),
        rd=certificate.rd if certificate else float("nan"),
        rc=certificate.rc if certificate else float("nan"),
        inner_iterations=inner_total,
        outer_iterations=outer_events,
        escapes=escapes,
        rank_drops=rank_drops,
        wall_time=time.perf_counter() - t0,
        termination=termination,
        seed=cfg.seed,
        flags=flags,
    )
    return report, final
