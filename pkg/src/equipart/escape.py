"""Optimality test and escape directions at rank-one (singular) points.

At a canonical singular point a e_1^T the second-order behaviour of the
objective along feasible curves is governed by the quadratic form
F(H) = <(L - Diag(L a a^T)) H, H> / 2 over tangent-cone directions.
Minimizing F subject to the cone constraints relaxes to a small SDP with two
affine constraints over the centered subspace; its optimal value is zero iff
a a^T is globally optimal for the bisection SDP, and any feasible point with
a negative value yields a strict second-order descent direction.

The reduced SDP is solved by a rank-3 factorization with a sphere-projected
gradient inner loop and a scalar multiplier on the remaining constraint.
Certificates for the optimal branch are produced independently of the
subproblem solver: the dual pair (y1, y2) comes from a one-dimensional
concave search over y2 of the smallest eigenvalue of the reduced slack, and
the resulting diagonal dual is verified directly against the convex KKT
system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .certify import laplacian_fro_norm
from .linalg import lanczos_min_eig, center_apply
from .variety import SingularPoint, try_project


@dataclass
class EscapeProblem:
    """Reduced two-constraint SDP data at a singular point.

    The centered subspace basis P (the Householder complement of e/sqrt(n))
    and the reduced cost are kept implicit; only their actions are exposed.
    """

    a: np.ndarray
    L: object
    w: np.ndarray  # diag(L a a^T) = (L a) o a
    _h: np.ndarray  # Householder vector mapping e/sqrt(n) to -e_1

    @property
    def n(self):
        return self.a.size

    def apply_p(self, x):
        """P x for x of shape (n-1,) or (n-1, k)."""
        x = np.asarray(x, dtype=float)
        y = np.concatenate([np.zeros((1,) + x.shape[1:]), x], axis=0)
        coef = 2.0 / (self._h @ self._h)
        return y - np.outer(self._h, coef * (self._h @ y)).reshape(y.shape)

    def apply_pt(self, z):
        """P^T z for z of shape (n,) or (n, k)."""
        z = np.asarray(z, dtype=float)
        coef = 2.0 / (self._h @ self._h)
        y = z - np.outer(self._h, coef * (self._h @ z)).reshape(z.shape)
        return y[1:]

    def apply_m(self, v):
        """(L - Diag(L a a^T)) v in the ambient space."""
        return self.L @ v - self.w[:, None] * v if v.ndim == 2 else self.L @ v - self.w * v

    def apply_cp(self, x):
        """Reduced cost action C_P x = P^T ((L - Diag(L a a^T)) (P x))."""
        return self.apply_pt(self.apply_m(self.apply_p(x)))

    def apply_q(self, x):
        """Reduced constraint action Q x = P^T (a o (P x))."""
        px = self.apply_p(x)
        return self.apply_pt(self.a[:, None] * px if px.ndim == 2 else self.a * px)


def build_escape(a, L):
    """Assemble the reduced escape problem for a balanced sign vector a."""
    a = a.a if isinstance(a, SingularPoint) else np.asarray(a, dtype=float)
    n = a.size
    if n % 2 == 1:
        raise ValueError("balanced sign vectors require even n")
    w = (L @ a) * a
    v = np.ones(n) / np.sqrt(n)
    h = v.copy()
    h[0] += 1.0  # maps e/sqrt(n) to -e_1; columns 2..n of the reflector span e-perp
    return EscapeProblem(a=a, L=L, w=w, _h=h)


@dataclass
class EscapeSolveResult:
    value: float  # <C_P, H H^T>
    H: np.ndarray  # reduced factor, (n-1) x r_esc
    constraint_violation: float
    converged: bool


def solve_escape(prob, r_esc=3, tol=1e-8, seed=0, max_outer=40, inner_max_iter=300):
    """Approximately minimize <C_P, H H^T> over ||H||^2 = n, <Q, H H^T> = 0.

    The norm constraint is enforced exactly by projecting onto the sphere of
    Frobenius radius sqrt(n); the remaining scalar constraint is handled by an
    augmented Lagrangian with multiplier u.  Exits early once the constraint
    violation is below tol with a clearly negative value, since a descent
    direction does not have to be a minimizer.
    """
    n = prob.n
    m = n - 1
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((m, r_esc))
    H *= np.sqrt(n) / np.linalg.norm(H)
    u = 0.0
    rho = 1.0

    def constraint(Hm):
        return float(np.sum(Hm * prob.apply_q(Hm)))

    def value(Hm):
        return float(np.sum(Hm * prob.apply_cp(Hm)))

    prev_viol = abs(constraint(H))
    for _outer in range(max_outer):
        H, stationary = _sphere_bb(prob, H, u, rho, np.sqrt(n), tol=1e-8, max_iter=inner_max_iter)
        c = constraint(H)
        val = value(H)
        if abs(c) <= tol * (1.0 + n) and (val <= -10.0 * tol or stationary):
            return EscapeSolveResult(value=val, H=H, constraint_violation=abs(c), converged=True)
        u += rho * c
        if abs(c) > 0.25 * prev_viol:
            rho = min(rho * 4.0, 1e8)
        prev_viol = abs(c)
    c = constraint(H)
    return EscapeSolveResult(value=value(H), H=H, constraint_violation=abs(c), converged=False)


def _sphere_bb(prob, H, u, rho, radius, tol, max_iter):
    """Projected gradient with BB steps for the penalized subproblem on the
    Frobenius sphere of the given radius."""

    def grad(Hm, c):
        return 2.0 * prob.apply_cp(Hm) + 2.0 * (u + rho * c) * prob.apply_q(Hm)

    def lagr(Hm, c):
        return float(np.sum(Hm * prob.apply_cp(Hm))) + u * c + 0.5 * rho * c * c

    nsq = radius * radius
    c = float(np.sum(H * prob.apply_q(H)))
    f = lagr(H, c)
    g = grad(H, c)
    g = g - (np.sum(g * H) / nsq) * H
    tau = 1.0 / max(np.linalg.norm(g), 1e-12)
    stationary = False
    for _ in range(max_iter):
        gnorm = np.linalg.norm(g)
        if gnorm <= tol * (1.0 + radius):
            stationary = True
            break
        accepted = False
        t = tau
        for _ls in range(40):
            Hn = H - t * g
            Hn *= radius / np.linalg.norm(Hn)
            cn = float(np.sum(Hn * prob.apply_q(Hn)))
            fn = lagr(Hn, cn)
            if fn <= f - 1e-4 * t * gnorm * gnorm:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            stationary = True  # no descent available along the projected gradient
            break
        prev_H, prev_g = H, g
        H, c, f = Hn, cn, fn
        g = grad(H, c)
        g = g - (np.sum(g * H) / nsq) * H
        s = H - prev_H
        y = g - (prev_g - (np.sum(prev_g * H) / nsq) * H)
        sy = abs(float(np.sum(s * y)))
        ss = float(np.sum(s * s))
        tau = ss / sy if sy > 1e-16 else 1.0 / max(np.linalg.norm(g), 1e-12)
        tau = min(max(tau, 1e-12), 1e6)
    return H, stationary


@dataclass
class EscapeOutcome:
    """Either a certified global optimum or a strict descent direction."""

    kind: str  # "optimal" or "direction"
    # optimal branch
    y1: float = 0.0
    y2: float = 0.0
    mu: np.ndarray | None = None
    verified: bool = False
    # direction branch
    direction: np.ndarray | None = None  # ambient n x (r-1) block
    f_value: float = 0.0  # F(direction) < 0
    value: float = 0.0  # reduced SDP objective estimate


def _min_eig_reduced(prob, y2, dense_cp=None, seed=0):
    if dense_cp is not None:
        Qd = dense_cp["Q"]
        return float(np.linalg.eigvalsh(dense_cp["C"] - y2 * Qd)[0])
    res = lanczos_min_eig(lambda x: prob.apply_cp(x) - y2 * prob.apply_q(x), prob.n - 1, tol=1e-10, seed=seed)
    return res.value


def _densify_reduced(prob):
    m = prob.n - 1
    eye = np.eye(m)
    C = prob.apply_cp(eye)
    Q = prob.apply_q(eye)
    return {"C": 0.5 * (C + C.T), "Q": 0.5 * (Q + Q.T)}


def dual_certificate(prob, seed=0, dense_cutoff=1500):
    """Best dual pair for the reduced SDP by concave 1-d maximization.

    Maximizes h(y2) = lambda_min(C_P - y2 Q); the maximum value is y1 and the
    pair (y1, y2) is dual feasible with objective n * y1, so y1 close to zero
    certifies that the primal optimum is zero.
    """
    dense_cp = _densify_reduced(prob) if prob.n <= dense_cutoff else None
    scale = 1.0 + laplacian_fro_norm(prob.L)

    def neg_h(y2):
        return -_min_eig_reduced(prob, y2, dense_cp, seed=seed)

    span = 10.0 * scale
    res = minimize_scalar(neg_h, bounds=(-span, span), method="bounded", options={"xatol": 1e-10 * span})
    y2 = float(res.x)
    y1 = -float(res.fun)
    return y1, y2


def certify_or_direction(a, L, r, tol=1e-8, seed=0):
    """Optimality test at the singular point a e_1^T.

    Returns an :class:`EscapeOutcome`: the ``optimal`` branch carries the
    verified diagonal dual mu of the convex bisection SDP; the ``direction``
    branch carries an ambient block H with F(H) < 0 and at most r - 1
    columns, feasible for the tangent cone at the singular point.
    """
    if r <= 1:
        raise ValueError("escape requires factor width r > 1")
    a_vec = a.a if isinstance(a, SingularPoint) else np.asarray(a, dtype=float)
    prob = build_escape(a_vec, L)
    n = prob.n
    scale = 1.0 + laplacian_fro_norm(L)
    val_tol = tol * scale

    sol = solve_escape(prob, r_esc=min(3, max(2, r - 1)), tol=tol, seed=seed)

    if sol.value >= -val_tol:
        y1, y2 = dual_certificate(prob, seed=seed)
        mu = prob.w + y1 * np.ones(n) + y2 * a_vec
        lam_min = _verify_centered_slack(L, mu, n, seed=seed)
        compl = abs(float(a_vec @ (L @ a_vec) - mu.sum()))
        verified = lam_min >= -tol * scale and compl <= tol * scale * n
        return EscapeOutcome(kind="optimal", y1=y1, y2=y2, mu=mu, verified=verified, value=sol.value)

    H = _truncate_columns(sol.H, max_cols=r - 1)
    if H.shape[1] > r - 1:
        sol = solve_escape(prob, r_esc=r - 1, tol=tol, seed=seed + 1)
        H = _truncate_columns(sol.H, max_cols=r - 1)
    G = prob.apply_p(H)
    G = center_apply(G)
    G *= np.sqrt(n) / np.linalg.norm(G)
    f_val = 0.5 * float(np.sum(G * prob.apply_m(G)))
    return EscapeOutcome(kind="direction", direction=G, f_value=f_val, value=sol.value)


def _truncate_columns(H, max_cols, sv_tol=1e-8):
    U, s, Vt = np.linalg.svd(H, full_matrices=False)
    keep = int(np.sum(s > sv_tol * s[0])) if s.size else 0
    keep = max(1, min(keep, max_cols))
    return U[:, :keep] * s[:keep]


def _verify_centered_slack(L, mu, n, seed=0):
    def jsj(x):
        y = center_apply(x)
        return center_apply(L @ y - mu * y)

    return lanczos_min_eig(jsj, n, tol=1e-10, seed=seed).value


def escape_step(a, H, L, f_ref, t0=1.0, t_min=1e-8):
    """Second-order descent step along the curve through a singular point.

    Walks the curve [a - (t^2/2) a o diag(H H^T), t H], projecting each trial
    onto the variety, halving t until the projection succeeds and the
    measured decrease from f_ref reaches |F(H)| t^2 / 2.

    Returns (point, f_new, t).  Raises RuntimeError on t underflow, which
    signals a numerically invalid direction.
    """
    a_vec = a.a if isinstance(a, SingularPoint) else np.asarray(a, dtype=float)
    H = np.asarray(H, dtype=float)
    w = (L @ a_vec) * a_vec
    f_curv = 0.5 * float(np.sum(H * (L @ H - w[:, None] * H)))
    if not f_curv < 0:
        raise ValueError(f"escape direction must have negative curvature value, got F(H)={f_curv:.3e}")
    row_energy = np.einsum("ij,ij->i", H, H)
    t = t0
    while t >= t_min:
        first = a_vec * (1.0 - 0.5 * t * t * row_energy)
        Y = np.concatenate([first[:, None], t * H], axis=1)
        cand = try_project(Y)
        if cand is not None:
            f_new = 0.5 * cand.objective(L)
            if f_ref - f_new >= 0.5 * abs(f_curv) * t * t and cand.rank >= 2:
                return cand, f_new, t
        t *= 0.5
    raise RuntimeError("escape step underflow: direction numerically invalid")
