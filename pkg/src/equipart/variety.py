"""Geometry of the feasible variety {R : unit-norm rows, columns summing to zero}.

The set is an algebraic variety rather than a manifold: its singular points
are exactly the rank-one feasible matrices a b^T with a a balanced sign
vector.  Away from those points the tangent-space projection has a closed
form driven by a single r x r positive definite solve, and the metric
projection of a nearby matrix Y reduces to a geometric median problem over
the rows of Y: if the median b of the rows is not attained at a data point,
the projection is the row-normalization of Y - e b^T, and it is unique.

This module provides feasibility checks, the smooth/singular split, tangent
projection, the Weiszfeld-based geometric median and retraction, rounding of
near-rank-one points to exact sign vectors, and membership oracles for the
tangent cone and second-order tangent set at singular points (used by the
test suite).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import ThinSVD, center_apply, thin_svd

ROW_TOL = 1e-10
COL_TOL = 1e-10
SMW_MAX_COND = 1e10
WEISZFELD_MAX_ITER = 500
VERTEX_SLACK = 1e-9  # the vertex criterion is closed; allow roundoff on the boundary


class NearSingularError(RuntimeError):
    """Tangent-space solve refused: base is numerically rank-one.

    Callers should treat the base as a near-singular point and switch to the
    rounding/escape path.
    """


class RetractionError(RuntimeError):
    """Backtracking budget exhausted without a successful projection."""


class ZeroRowError(ValueError):
    """Row normalization hit a (numerically) zero row."""


@dataclass
class VarietyPoint:
    """Dense n x r factor lying on the variety, with cached spectral data."""

    R: np.ndarray
    _svd: ThinSVD | None = field(default=None, repr=False, compare=False)

    def __init__(self, R, validate=True):
        R = np.ascontiguousarray(R, dtype=float)
        if R.ndim != 2:
            raise ValueError("factor must be a 2-d array")
        self.R = R
        self._svd = None
        if validate:
            row_err, col_err = feasibility_errors(R)
            if row_err > ROW_TOL or col_err > COL_TOL * np.sqrt(R.shape[0]):
                raise ValueError(
                    f"factor is not feasible: row-norm error {row_err:.3e}, column-sum error {col_err:.3e}"
                )

    @property
    def n(self):
        return self.R.shape[0]

    @property
    def r(self):
        return self.R.shape[1]

    @property
    def svd(self):
        if self._svd is None:
            self._svd = thin_svd(self.R)
        return self._svd

    @property
    def spectral_norm(self):
        return float(self.svd.s[0])

    @property
    def rank(self):
        return self.svd.rank

    def objective(self, L):
        """<L, R R^T> without forming the n x n product."""
        return float(np.sum(self.R * (L @ self.R)))


def feasibility_errors(R):
    """(max row-norm deviation from 1, max absolute column sum)."""
    R = np.asarray(R)
    row_err = float(np.abs(np.einsum("ij,ij->i", R, R) - 1.0).max())
    col_err = float(np.abs(R.sum(axis=0)).max())
    return row_err, col_err


@dataclass
class TangentVector:
    """Ambient n x r direction attached to a base point."""

    H: np.ndarray
    base: VarietyPoint

    def norm(self):
        return float(np.linalg.norm(self.H))

    def inner(self, other):
        other = other.H if isinstance(other, TangentVector) else other
        return float(np.sum(self.H * other))


@dataclass(frozen=True)
class SingularPoint:
    """Balanced sign vector a; canonical rank-one point is a e_1^T."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if not np.all(np.abs(np.abs(a) - 1.0) < 1e-12):
            raise ValueError("entries of a singular point must be +/-1")
        if abs(a.sum()) > 1e-9:
            raise ValueError("sign vector must be balanced (sum zero)")
        object.__setattr__(self, "a", a)

    @property
    def n(self):
        return self.a.size

    def as_factor(self, r):
        """Canonical factor a e_1^T of width r >= 1."""
        R = np.zeros((self.n, r))
        R[:, 0] = self.a
        return VarietyPoint(R)


def is_singular(p, delta):
    """True iff p lies in the closed near-singular region B^{delta+}."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return p.spectral_norm >= np.sqrt((1.0 - delta) * p.n)


def diag_multiplier(base, C):
    """Multiplier lambda for the row-norm constraints in the projection onto
    the tangent space at a smooth base (the Sherman-Morrison-Woodbury form).

    Solves (I - R R^T / n) lambda = diag(J C R^T) through the r x r system
    (I - R^T R / n); raises NearSingularError when that system is
    ill-conditioned, which happens exactly near rank-one points.
    """
    R = base.R
    n, r = R.shape
    G = R.T @ R
    M = np.eye(r) - G / n
    w = np.linalg.eigvalsh(M)
    if w[0] <= 0.0 or w[-1] / w[0] > SMW_MAX_COND:
        raise NearSingularError(
            f"I - R^T R/n has condition {w[-1] / max(w[0], 1e-300):.2e}; base is numerically rank-one"
        )
    d = np.einsum("ij,ij->i", center_apply(C), R)
    lam = d + R @ (np.linalg.solve(M, R.T @ d)) / n
    return lam


def project_tangent(base, C):
    """Orthogonal projection of an ambient matrix onto the tangent space."""
    C = np.asarray(C, dtype=float)
    lam = diag_multiplier(base, C)
    H = center_apply(C - lam[:, None] * base.R)
    return TangentVector(H=H, base=base)


def riemannian_gradient(base, euclid_grad):
    """Riemannian gradient = tangent projection of the Euclidean gradient."""
    return project_tangent(base, euclid_grad)


def normalize_rows(Y):
    """Scale each row to unit norm; rows below 1e-14 are an error."""
    Y = np.asarray(Y, dtype=float)
    norms = np.linalg.norm(Y, axis=1)
    if np.any(norms < 1e-14):
        raise ZeroRowError("cannot normalize a zero row")
    return Y / norms[:, None]


@dataclass
class GeoMedianResult:
    point: np.ndarray
    at_vertex: bool
    vertex_index: int | None
    converged: bool
    iterations: int


def _vertex_optimal(Y, i, coincide_eps):
    """Subgradient test: data point y_i minimizes the sum of distances iff
    the pulls of the non-coincident points have norm at most the multiplicity
    of y_i among the data."""
    diff = Y - Y[i]
    d = np.linalg.norm(diff, axis=1)
    coincident = d <= coincide_eps
    m = int(np.sum(coincident))
    pull = (diff[~coincident] / d[~coincident, None]).sum(axis=0)
    return float(np.linalg.norm(pull)) <= m + VERTEX_SLACK


def geometric_median(Y, tol=None, max_iter=WEISZFELD_MAX_ITER):
    """Geometric median of the rows of Y.

    Runs the Weiszfeld iteration with Newton refinement once the iterate is
    safely away from the data points (the objective is smooth there and its
    r x r Hessian is cheap, so the endgame converges quadratically instead of
    linearly).  Returns a :class:`GeoMedianResult`.  ``at_vertex`` is True
    when some data point itself is optimal, detected by the exact subgradient
    criterion, in which case ``point`` is that row.  ``converged`` is False
    only when the iteration budget ran out before either outcome was
    established.
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    scale = float(np.linalg.norm(Y, axis=1).mean())
    if tol is None:
        tol = 1e-12 * (1.0 + scale)
    on_eps = 1e-12 * (1.0 + scale)

    b = Y.mean(axis=0)
    d = np.linalg.norm(Y - b, axis=1)
    if d.min() <= on_eps:
        # the mean collided with a data point; nudge it deterministically
        rng = np.random.default_rng(0)
        step = rng.standard_normal(Y.shape[1])
        b = b + 1e-8 * (1.0 + scale) * step / np.linalg.norm(step)

    gnorm_prev = np.inf
    for it in range(1, max_iter + 1):
        diff = Y - b
        d = np.linalg.norm(diff, axis=1)
        near = int(np.argmin(d))
        if d[near] <= on_eps:
            if _vertex_optimal(Y, near, on_eps):
                return GeoMedianResult(Y[near].copy(), True, near, True, it)
            # Vardi-Zhang step off the data point
            mask = d > on_eps
            m = n - int(np.sum(mask))
            w = 1.0 / d[mask]
            T = (Y[mask] * w[:, None]).sum(axis=0) / w.sum()
            pull = (diff[mask] / d[mask, None]).sum(axis=0)
            rnorm = float(np.linalg.norm(pull))
            lam = min(1.0, m / rnorm)
            b = (1.0 - lam) * T + lam * b
            continue
        units = diff / d[:, None]
        grad = -units.sum(axis=0)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return GeoMedianResult(b.copy(), False, None, True, it)
        # the subgradient criterion is exact, so testing candidate vertices
        # early never misclassifies; near-flat configurations (collinear-ish
        # rows) need this because the iterates crawl
        if (d[near] <= 1e-6 * (1.0 + scale) or it % 25 == 0) and _vertex_optimal(Y, near, on_eps):
            return GeoMedianResult(Y[near].copy(), True, near, True, it)
        w = 1.0 / d
        stepped = False
        if it > 2 and gnorm < gnorm_prev:
            # Newton step on the smooth region: hess = sum w_i (I - u_i u_i^T)
            H = w.sum() * np.eye(Y.shape[1]) - (units * w[:, None]).T @ units
            try:
                s = np.linalg.solve(H, -grad)
            except np.linalg.LinAlgError:
                s = None
            if s is not None:
                b_new = b + s
                d_new = np.linalg.norm(Y - b_new, axis=1)
                if d_new.min() > on_eps:
                    g_new = -((Y - b_new) / d_new[:, None]).sum(axis=0)
                    if np.linalg.norm(g_new) < 0.9 * gnorm:
                        b = b_new
                        stepped = True
        if not stepped:
            b = (Y * w[:, None]).sum(axis=0) / w.sum()
        gnorm_prev = gnorm

    # budget exhausted: decisive last sweep over every data point
    for i in range(n):
        if _vertex_optimal(Y, i, on_eps):
            return GeoMedianResult(Y[i].copy(), True, i, True, max_iter)
    return GeoMedianResult(b.copy(), False, None, False, max_iter)


def try_project(Y, tol=None, max_iter=WEISZFELD_MAX_ITER):
    """Metric projection of Y onto the variety, or None when unavailable.

    None is returned when the geometric median of the rows sits at a data
    point (the projection then has no row-normalization form and the caller
    must shrink its step) or when the median iteration fails to converge.
    """
    Y = np.asarray(Y, dtype=float)
    med = geometric_median(Y, tol=tol, max_iter=max_iter)
    if med.at_vertex or not med.converged:
        return None
    R = normalize_rows(Y - med.point[None, :])
    row_err, col_err = feasibility_errors(R)
    if row_err > ROW_TOL or col_err > COL_TOL * np.sqrt(Y.shape[0]):
        return None
    return VarietyPoint(R, validate=False)


@dataclass
class RetractResult:
    point: VarietyPoint
    backtracks: int


def retract(base, H, sigma=2.0, max_backtracks=25):
    """Project base.R + H onto the variety, halving H while the projection is
    undefined (median at a vertex).  Finite termination is guaranteed for
    small enough steps at a smooth base."""
    if sigma <= 1.0:
        raise ValueError("backtracking factor sigma must exceed 1")
    H = H.H if isinstance(H, TangentVector) else np.asarray(H, dtype=float)
    if not np.all(np.isfinite(H)):
        raise ValueError("retraction direction contains non-finite entries")
    step = H
    for k in range(max_backtracks + 1):
        cand = try_project(base.R + step)
        if cand is not None:
            return RetractResult(point=cand, backtracks=k)
        step = step / sigma
    raise RetractionError(
        f"no successful projection within {max_backtracks} backtracks; base may be near-singular"
    )


def round_to_singular(p, delta, zero_tol=1e-10):
    """Round a near-rank-one point to the sign pattern of its top singular
    vector.  Returns None when the result is not a variety point (a zero
    entry in the singular vector, odd n, or an unbalanced sign sum)."""
    if not 0 < delta < 0.5:
        raise ValueError("rounding requires delta < 1/2")
    if not is_singular(p, delta):
        raise ValueError("point is not in the near-singular region for this delta")
    u = p.svd.U[:, 0]
    nz = np.nonzero(np.abs(u) > zero_tol)[0]
    if nz.size != u.size:
        return None
    if u[nz[0]] < 0:
        u = -u
    a = np.sign(u)
    if p.n % 2 == 1 or abs(a.sum()) > 0.5:
        return None
    return SingularPoint(a=a)


def tangent_cone_member(a, H, tol=1e-8):
    """Membership oracle for the tangent cone at the canonical singular point
    a e_1^T: the first column must vanish, the remaining block H1 must have
    zero column sums and satisfy a^T diag(H1 H1^T) = 0."""
    a = a.a if isinstance(a, SingularPoint) else np.asarray(a, dtype=float)
    H = np.asarray(H, dtype=float)
    hnorm = 1.0 + np.linalg.norm(H)
    H1 = H[:, 1:]
    if np.linalg.norm(H[:, 0]) > tol * hnorm:
        return False
    if np.linalg.norm(H1.sum(axis=0)) > tol * hnorm:
        return False
    quad = float(a @ np.einsum("ij,ij->i", H1, H1))
    return abs(quad) <= tol * hnorm**2


def second_tangent_member(a, H, W, tol=1e-8):
    """Membership oracle for the second-order tangent set at a e_1^T along a
    tangent-cone direction [0, H1].

    The first column of W must equal -a o diag(H1 H1^T) and W1 must have zero
    column sums; the remaining condition splits on whether H1 is a rank-one
    multiple of a: generically a^T diag(H1 W1^T) = 0, in the rank-one case
    a^T diag(W1 W1^T) = 0.
    """
    a = a.a if isinstance(a, SingularPoint) else np.asarray(a, dtype=float)
    H = np.asarray(H, dtype=float)
    W = np.asarray(W, dtype=float)
    H1 = H[:, 1:]
    W1 = W[:, 1:]
    wnorm = 1.0 + np.linalg.norm(W) + np.linalg.norm(H) ** 2
    first_col = -a * np.einsum("ij,ij->i", H1, H1)
    if np.linalg.norm(W[:, 0] - first_col) > tol * wnorm:
        return False
    if np.linalg.norm(W1.sum(axis=0)) > tol * wnorm:
        return False
    n = a.size
    proj = np.outer(a, a @ H1) / n
    rank_one_along_a = np.linalg.norm(H1 - proj) <= tol * (1.0 + np.linalg.norm(H1))
    if rank_one_along_a:
        quad = float(a @ np.einsum("ij,ij->i", W1, W1))
    else:
        quad = float(a @ np.einsum("ij,ij->i", H1, W1))
    return abs(quad) <= tol * wnorm**2
