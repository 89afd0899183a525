import numpy as np
import pytest

from equipart.certify import (
    NearSingularNormalEquations,
    recover_duals,
    residues_bisection,
    residues_equipartition,
)
from equipart.datasets import gnp_graph, path_graph
from equipart.graph_io import laplacian
from equipart.variety import try_project


def random_point(n, r, seed):
    rng = np.random.default_rng(seed)
    for _ in range(10):
        p = try_project(rng.standard_normal((n, r)))
        if p is not None:
            return p
    raise AssertionError("no projectable draw")


def random_orthogonal(r, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((r, r)))
    return Q


def test_residues_detect_nonoptimality():
    # a feasible but non-stationary point must show nonzero complementarity
    L = laplacian(path_graph(3))
    p = random_point(3, 2, 0)
    cert = residues_bisection(p, L, lam=np.zeros(3))
    # with lam = 0 the slack is L itself, so Rc = |<L, RR^T>| / (1 + ||L||_F)
    expected = abs(np.sum(p.R * (L @ p.R))) / (1.0 + np.linalg.norm(L.toarray()))
    assert cert.rc == pytest.approx(expected, rel=1e-12)
    assert cert.rc > 1e-3


def test_residues_orthogonal_invariance():
    L = laplacian(gnp_graph(12, 0.5, seed=2))
    p = random_point(12, 5, 1)
    c1 = residues_bisection(p, L)
    from equipart.variety import VarietyPoint

    p2 = VarietyPoint(p.R @ random_orthogonal(5, 3))
    c2 = residues_bisection(p2, L)
    assert abs(c1.rp - c2.rp) <= 1e-10
    assert abs(c1.rd - c2.rd) <= 1e-10
    assert abs(c1.rc - c2.rc) <= 1e-10


def test_bisection_rd_matches_dense():
    L = laplacian(gnp_graph(40, 0.2, seed=4))
    p = random_point(40, 6, 5)
    cert = residues_bisection(p, L)
    # dense replica of the centered slack spectrum
    lam = cert.lam
    S = L.toarray() - np.diag(lam)
    J = np.eye(40) - np.ones((40, 40)) / 40
    ref = np.linalg.eigvalsh(J @ S @ J)[0]
    assert abs(max(0.0, -ref) / (1 + np.linalg.norm(L.toarray())) - cert.rd) <= 1e-8


def test_equipartition_rd_matches_dense():
    rng = np.random.default_rng(7)
    n, k, r = 16, 4, 6
    L = laplacian(gnp_graph(n, 0.5, seed=6))
    alpha = n / (k - 1)
    p = random_point(n, r, 8)
    Z = -np.eye(r) * 0.1
    cert = residues_equipartition(p, Z, L, alpha)
    lam = cert.lam
    S = L.toarray() - np.diag(lam)
    J = np.eye(n) - np.ones((n, n)) / n
    svd = p.svd
    mask = svd.s**2 >= alpha * (1 - 1e-6)
    U1 = svd.U[:, mask]
    defl = S - U1 @ (U1.T @ S @ U1) @ U1.T
    terms = [max(0.0, -np.linalg.eigvalsh(J @ defl @ J)[0])]
    if U1.shape[1]:
        terms.append(np.linalg.eigvalsh(U1.T @ S @ U1)[-1])
    ref = max(terms) / (1 + np.linalg.norm(L.toarray()))
    assert abs(ref - cert.rd) <= 1e-8
    rc_ref = abs(np.sum(defl * (p.R @ p.R.T))) / (1 + np.linalg.norm(L.toarray()))
    assert abs(rc_ref - cert.rc) <= 1e-10


def test_equipartition_inactive_bound_reduces_to_bisection():
    n, r = 12, 4
    L = laplacian(gnp_graph(n, 0.5, seed=9))
    p = random_point(n, r, 10)
    alpha = 4.0 * p.spectral_norm**2  # far above the spectrum: U1 empty
    Z = np.zeros((r, r))
    c_eq = residues_equipartition(p, Z, L, alpha)
    c_bi = residues_bisection(p, L)
    assert abs(c_eq.rd - c_bi.rd) <= 1e-12
    assert abs(c_eq.rc - c_bi.rc) <= 1e-12


def test_recover_duals_constructed_preimages():
    rng = np.random.default_rng(11)
    n, r = 15, 4
    p = random_point(n, r, 12)
    c = rng.standard_normal(n)
    y, z = recover_duals(p, None, c[:, None] * p.R)
    assert np.linalg.norm(y - c) <= 1e-10 * (1 + np.linalg.norm(c))
    assert np.linalg.norm(z) <= 1e-10
    z0 = rng.standard_normal(r)
    y, z = recover_duals(p, None, np.outer(np.ones(n), z0))
    assert np.linalg.norm(z - z0) <= 1e-10
    assert np.linalg.norm(y) <= 1e-10
    # mixed target reproduced exactly through g_R^*
    y0 = rng.standard_normal(n)
    target = y0[:, None] * p.R + np.outer(np.ones(n), z0)
    y, z = recover_duals(p, None, target)
    back = y[:, None] * p.R + np.outer(np.ones(n), z)
    assert np.linalg.norm(back - target) <= 1e-9


def test_recover_duals_near_singular_flagged():
    a = np.array([1.0, -1.0, 1.0, -1.0])
    from equipart.variety import SingularPoint

    p = SingularPoint(a).as_factor(2)
    with pytest.raises(NearSingularNormalEquations):
        recover_duals(p, None, np.ones((4, 2)))


def test_recover_duals_consistent_with_diag_multiplier():
    # at a converged solve, (y, z) from least squares reproduces lambda
    from equipart.bisection import BBConfig, solve_bisection

    L = laplacian(gnp_graph(12, 0.5, seed=13))
    rep, point = solve_bisection(L, BBConfig(seed=3, tol=1e-9), r=6)
    assert rep.termination == "converged"
    y, z = recover_duals(point, None, L @ point.R)
    cert = residues_bisection(point, L)
    assert np.linalg.norm(y - cert.lam) <= 1e-8 * (1 + np.linalg.norm(cert.lam))
