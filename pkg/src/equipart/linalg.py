"""Shared numerical kernels: thin SVD, cone projections, extreme eigenvalues.

The factors handled by the solvers are tall and thin (n >> r), so the thin
SVD switches to an eigendecomposition of the r x r Gram matrix once n > 4r.
Smallest eigenvalues of large implicit symmetric operators are computed with
ARPACK's Lanczos iteration behind a deterministic seeded start vector, with a
dense fallback at small sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

GRAM_PATH_FACTOR = 4  # use the Gram-matrix SVD when n > 4 r
DEFAULT_TAU_ALPHA = 1e-6  # relative threshold for "singular value equals sqrt(alpha)"
_DENSE_EIG_CUTOFF = 400


@dataclass(frozen=True)
class ThinSVD:
    """Thin SVD R = U diag(s) V^T trimmed to numerical rank."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        return self.s.size


def thin_svd(R):
    """Thin SVD of a dense n x r factor, trimmed to numerical rank.

    For tall factors the decomposition is obtained from the eigendecomposition
    of R^T R, which costs O(n r^2) instead of LAPACK's full bidiagonalization.
    """
    R = np.asarray(R, dtype=float)
    if not np.all(np.isfinite(R)):
        raise ValueError("factor contains non-finite entries")
    n, r = R.shape
    if n > GRAM_PATH_FACTOR * r:
        G = R.T @ R
        w, V = np.linalg.eigh(G)
        w = w[::-1].copy()
        V = V[:, ::-1].copy()
        s = np.sqrt(np.clip(w, 0.0, None))
        cutoff = max(n, r) * np.finfo(float).eps * (s[0] if s.size else 0.0)
        k = int(np.sum(s > cutoff))
        s = s[:k]
        V = V[:, :k]
        U = R @ (V / s)
        # one orthonormalization pass cleans up roundoff from near-equal
        # singular values; the triangular factor is absorbed into s, V
        Q, T = np.linalg.qr(U)
        Us, ss, Vs = np.linalg.svd(T * s)
        return ThinSVD(U=Q @ Us, s=ss, V=V @ Vs.T)
    U, s, Vt = np.linalg.svd(R, full_matrices=False)
    cutoff = max(n, r) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    k = int(np.sum(s > cutoff))
    return ThinSVD(U=U[:, :k].copy(), s=s[:k].copy(), V=Vt[:k].T.copy())


def _symmetrize_checked(M, tol=1e-10):
    M = np.asarray(M, dtype=float)
    asym = np.abs(M - M.T).max() if M.size else 0.0
    scale = 1.0 + (np.abs(M).max() if M.size else 0.0)
    if asym > tol * scale:
        raise ValueError(f"matrix is not symmetric: max asymmetry {asym:.3e}")
    return 0.5 * (M + M.T)


def project_nsd(M, tol=1e-10):
    """Frobenius projection of a symmetric matrix onto the NSD cone."""
    W = _symmetrize_checked(M, tol)
    w, Q = np.linalg.eigh(W)
    P = (Q * np.minimum(w, 0.0)) @ Q.T
    return 0.5 * (P + P.T)


def project_psd(M, tol=1e-10):
    """Frobenius projection of a symmetric matrix onto the PSD cone."""
    W = _symmetrize_checked(M, tol)
    w, Q = np.linalg.eigh(W)
    P = (Q * np.maximum(w, 0.0)) @ Q.T
    return 0.5 * (P + P.T)


def center_apply(X):
    """Apply the centering projector J = I - e e^T / n to the rows of X."""
    X = np.asarray(X, dtype=float)
    return X - X.mean(axis=0, keepdims=True)


@dataclass
class MinEigResult:
    value: float
    vector: np.ndarray
    converged: bool
    residual: float


def lanczos_min_eig(apply, n, tol=1e-9, max_iter=None, seed=0):
    """Smallest eigenvalue of an implicit symmetric operator on R^n.

    Parameters
    ----------
    apply : callable
        y = apply(x) computing the symmetric operator action.
    n : int
        Dimension.
    tol : float
        Target residual: |S v - lam v| <= tol * (1 + |lam|).
    max_iter : int or None
        Iteration budget for the iterative path.
    seed : int
        Seeds the start vector; identical seeds give identical results.

    Returns
    -------
    MinEigResult with ``converged=False`` when the budget was exhausted, in
    which case ``value`` holds the best Ritz estimate.
    """
    if n <= _DENSE_EIG_CUTOFF:
        S = np.empty((n, n))
        eye = np.eye(n)
        for i in range(n):
            S[:, i] = apply(eye[:, i])
        S = 0.5 * (S + S.T)
        w, Q = np.linalg.eigh(S)
        v = Q[:, 0]
        res = float(np.linalg.norm(apply(v) - w[0] * v))
        return MinEigResult(value=float(w[0]), vector=v, converged=True, residual=res)

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    op = spla.LinearOperator((n, n), matvec=apply, dtype=float)
    try:
        w, V = spla.eigsh(op, k=1, which="SA", tol=tol, v0=v0, maxiter=max_iter)
        lam, v = float(w[0]), V[:, 0]
        converged = True
    except spla.ArpackNoConvergence as exc:
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            lam, v = float(exc.eigenvalues[0]), exc.eigenvectors[:, 0]
        else:
            lam, v = float("nan"), v0 / np.linalg.norm(v0)
        converged = False
    res = float(np.linalg.norm(apply(v) - lam * v)) if np.isfinite(lam) else float("inf")
    if res > tol * (1.0 + abs(lam)):
        converged = False
    return MinEigResult(value=lam, vector=v, converged=converged, residual=res)


@dataclass(frozen=True)
class SpectralSplit:
    """Left singular blocks of a factor split at the spectral bound alpha.

    U1 collects columns with s_i^2 >= alpha (1 - tau_alpha); U3 is an
    orthonormal basis of the orthogonal complement of range(R).  U3 is
    materialized (n x (n - rank)), so this type is meant for moderate n.
    """

    U1: np.ndarray
    U3: np.ndarray
    tau_alpha: float


def split_mask(svd, alpha, tau_alpha=DEFAULT_TAU_ALPHA):
    """Boolean mask of singular values sitting at the bound sqrt(alpha)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not 0 < tau_alpha < 1:
        raise ValueError("tau_alpha must lie in (0, 1)")
    return svd.s**2 >= alpha * (1.0 - tau_alpha)


def spectral_split(svd, alpha, tau_alpha=DEFAULT_TAU_ALPHA):
    mask = split_mask(svd, alpha, tau_alpha)
    U1 = svd.U[:, mask]
    U3 = scipy.linalg.null_space(svd.U.T) if svd.U.size else np.eye(svd.U.shape[0])
    return SpectralSplit(U1=U1, U3=U3, tau_alpha=tau_alpha)
