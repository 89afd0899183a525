import itertools

import numpy as np
import pytest

from equipart.bisection import (
    BBConfig,
    BisectionObjective,
    bb_fallback_alpha,
    bb_step,
    default_rank,
    random_feasible_point,
    rank_adapt,
    solve_bisection,
    solve_smooth,
)
from equipart.datasets import complete_graph, cycle_graph, disjoint_cliques, gnp_graph, path_graph
from equipart.graph_io import laplacian
from equipart.variety import try_project

# dense interior-point oracle value of the P4 bisection SDP, <L, X> scale
P4_SDP_VALUE = 4.0


def test_default_rank():
    assert default_rank(200, 2) == 22
    with pytest.warns(UserWarning):
        assert default_rank(64, 5) == 16
    assert default_rank(2, 2) == 4  # k - 1 + ceil(sqrt(2 (n + 1))) = 1 + 3
    with pytest.raises(ValueError):
        default_rank(1, 2)


def test_bb_fallback_alpha():
    assert bb_fallback_alpha(2.0) == 1.0
    assert bb_fallback_alpha(1e-2) == pytest.approx(1e2)
    assert bb_fallback_alpha(1e-7) == 1e5


def test_bb_step_quotients():
    rng = np.random.default_rng(0)
    g = rng.standard_normal((6, 3))
    assert bb_step(g, g, 1.0, "BB1") == pytest.approx(1.0)
    assert bb_step(g, g, 1.0, "BB2") == pytest.approx(1.0)
    # orthogonal change gives a zero BB1 step, which the caller clamps
    y = rng.standard_normal((6, 3))
    y -= g * (np.sum(g * y) / np.sum(g * g))
    assert bb_step(g, y, 1.0, "BB1") <= 1e-12
    # Cauchy-Schwarz: tau * BB1^2 <= BB2 for every tau and pair
    for _ in range(50):
        g = rng.standard_normal((5, 2))
        y = rng.standard_normal((5, 2))
        tau = float(10.0 ** rng.uniform(-3, 3))
        bb1 = bb_step(g, y, tau, "BB1")
        bb2 = bb_step(g, y, tau, "BB2")
        assert tau * bb1**2 <= bb2 * (1 + 1e-12)
    with pytest.raises(ValueError):
        bb_step(np.zeros((2, 2)), g[:2, :2], 1.0)


def test_solve_smooth_constant_objective_on_complete_graph():
    # L = n I - e e^T makes f constant on the variety; gradient vanishes
    L = laplacian(complete_graph(4))
    rng = np.random.default_rng(1)
    start = random_feasible_point(4, 3, rng)
    res = solve_smooth(BisectionObjective(L), start, BBConfig(seed=1))
    assert res.status == "converged"
    assert res.iterations == 0
    assert res.f == pytest.approx(8.0, abs=1e-10)  # n^2 / 2


def test_solve_smooth_monotone_envelope():
    L = laplacian(gnp_graph(14, 0.4, seed=3))
    rng = np.random.default_rng(2)
    start = random_feasible_point(14, 6, rng)
    res = solve_smooth(BisectionObjective(L), start, BBConfig(seed=2, tol=1e-8))
    assert res.status in ("converged", "hit_singular")
    f0 = res.f_trace[0]
    assert all(f <= f0 + 1e-10 for f in res.f_trace)


def test_p4_matches_dense_sdp_oracle():
    L = laplacian(path_graph(4))
    rep, _ = solve_bisection(L, BBConfig(seed=5), r=3)
    assert rep.obj == pytest.approx(P4_SDP_VALUE, abs=1e-6)


def test_random_instance_certified_by_residues():
    L = laplacian(gnp_graph(12, 0.5, seed=8))
    rep, point = solve_bisection(L, BBConfig(seed=4, tol=1e-8), r=6)
    assert rep.termination in ("converged", "certified_singular")
    assert rep.rp <= 1e-8
    assert rep.rc <= 1e-8
    assert rep.rd <= 1e-6


def test_rank_adapt_rules():
    rng = np.random.default_rng(5)
    # sigma = (10, .5, .4): gap after the first value, floor keeps two columns
    Q, _ = np.linalg.qr(rng.standard_normal((12, 3)))
    base = try_project(Q @ np.diag([10.0, 0.5, 0.4]))
    assert base is not None
    s = base.svd.s
    if s[0] / s[1] > 10.0:
        adapted = rank_adapt(base, ratio=10.0)
        assert adapted.r == 2
    # no qualifying gap: unchanged
    flat = try_project(Q @ np.diag([5.0, 4.0, 3.0]))
    assert flat is not None
    assert rank_adapt(flat, ratio=10.0) is flat


def test_rank_adapt_objective_perturbation_bound():
    # dropping energy below a >10 gap moves f by at most ||L||_2 * (energy)
    rng = np.random.default_rng(6)
    n, r = 16, 5
    L = laplacian(gnp_graph(n, 0.4, seed=9))
    Lnorm = np.linalg.norm(L.toarray(), 2)
    base = None
    while base is None:
        A = rng.standard_normal((n, 2))
        B = 1e-3 * rng.standard_normal((n, r - 2))
        base = try_project(np.concatenate([A, B], axis=1))
    s = base.svd.s
    ratios = s[:-1] / s[1:]
    if not np.any(ratios > 10.0):
        pytest.skip("no spectral gap materialized for this draw")
    j = int(np.argmax(ratios))
    dropped = float(np.sum(s[max(2, j + 1) :] ** 2))
    adapted = rank_adapt(base, ratio=10.0)
    assert adapted.r < base.r
    f0 = 0.5 * base.objective(L)
    f1 = 0.5 * adapted.objective(L)
    assert abs(f1 - f0) <= Lnorm * dropped + 1e-12


def test_two_cliques_certified_singular_optimum():
    # the SDP optimum is the rank-one component cut with value zero
    L = laplacian(disjoint_cliques([4, 4]))
    best = min(
        np.array(v) @ (L @ np.array(v))
        for v in itertools.product([-1.0, 1.0], repeat=8)
        if sum(v) == 0
    )
    assert best == 0.0
    rep, point = solve_bisection(L, BBConfig(seed=7, delta0=0.4))
    assert rep.obj == pytest.approx(0.0, abs=1e-8)
    assert rep.termination == "certified_singular"
    assert rep.rp <= 1e-8 and rep.rc <= 1e-8 and rep.rd <= 1e-6


def test_delta_halving_and_event_budget():
    L = laplacian(disjoint_cliques([4, 4]))
    rep, _ = solve_bisection(L, BBConfig(seed=8, delta0=0.4))
    assert rep.outer_iterations <= 50


def test_determinism_same_seed():
    L = laplacian(gnp_graph(10, 0.5, seed=11))
    r1, _ = solve_bisection(L, BBConfig(seed=9))
    r2, _ = solve_bisection(L, BBConfig(seed=9))
    d1, d2 = r1.to_dict(), r2.to_dict()
    d1.pop("wall_time")
    d2.pop("wall_time")
    assert d1 == d2


def test_escape_path_on_forced_bad_rounding():
    # starting exactly at a non-optimal singular point forces the escape path
    L = laplacian(cycle_graph(4))
    a = np.array([1.0, -1.0, 1.0, -1.0])
    from equipart.variety import SingularPoint

    start = SingularPoint(a).as_factor(3)
    rep, point = solve_bisection(L, BBConfig(seed=10, delta0=0.4), r=3, start=start)
    assert rep.escapes >= 1
    assert rep.obj == pytest.approx(8.0, abs=1e-6)
