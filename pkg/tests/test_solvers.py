from __future__ import annotations

import numpy as np
import pytest

from ddw.errors import DdwError, DimensionError
from ddw.solvers import LpProblem, QpProblem, Status, enumerate_vertices, kkt_residuals, solve_lp, solve_qp

from conftest import brute_force_qp, check_lp_kkt, random_lp, random_pd


def test_lp_single_active_bound():
    sol = solve_lp(LpProblem([1.0], G=[[-1.0]], h=[-1.0], lower=[0.0], upper=[30.0]))
    assert sol.status is Status.OPTIMAL
    assert sol.x[0] == pytest.approx(1.0)
    assert sol.objective == pytest.approx(1.0)


def test_lp_max_with_hand_dual():
    p = LpProblem([1.0, 1.0], G=[[1.0, 1.0]], h=[1.0], sense="max")
    sol = solve_lp(p)
    assert sol.objective == pytest.approx(1.0)
    assert sol.row_duals[0] == pytest.approx(1.0)
    check_lp_kkt(p, sol)


def test_lp_detects_infeasible_and_unbounded():
    infeas = LpProblem([1.0], G=[[1.0], [-1.0]], h=[1.0, -2.0])
    assert solve_lp(infeas).status is Status.INFEASIBLE
    unb = LpProblem([-1.0], G=[[-1.0]], h=[0.0])
    assert solve_lp(unb).status is Status.UNBOUNDED


def test_lp_rejects_bad_dimensions():
    with pytest.raises(DimensionError):
        solve_lp(LpProblem([1.0, 1.0], G=[[1.0, 1.0]], h=[1.0, 2.0]))


@pytest.mark.parametrize("sense", ["min", "max"])
def test_lp_matches_vertex_enumeration(rng, sense):
    matched = 0
    for _ in range(50):
        p = random_lp(rng, n=4, mi=4, me=int(rng.integers(0, 2)), sense=sense)
        verts = enumerate_vertices(p)
        sol = solve_lp(p)
        if not verts:
            assert sol.status is Status.INFEASIBLE
            continue
        vals = [p.c @ v for v in verts]
        best = min(vals) if sense == "min" else max(vals)
        assert sol.status is Status.OPTIMAL
        assert abs(sol.objective - best) <= 1e-9 * max(1.0, abs(best))
        check_lp_kkt(p, sol)
        matched += 1
    assert matched > 25


def test_lp_is_deterministic(rng):
    p = random_lp(rng, n=6, mi=5, me=1)
    a, b = solve_lp(p), solve_lp(p)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.row_duals.tobytes() == b.row_duals.tobytes()


def test_vertices_of_unit_square():
    verts = enumerate_vertices(LpProblem([0.0, 0.0], lower=[0, 0], upper=[1, 1]))
    assert sorted(map(tuple, np.round(verts, 12))) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_vertices_of_simplex():
    verts = enumerate_vertices(LpProblem([0.0, 0.0], G=[[1.0, 1.0]], h=[1.0]))
    assert sorted(map(tuple, np.round(verts, 12))) == [(0, 0), (0, 1), (1, 0)]


def test_vertices_contain_every_lp_optimum(rng):
    p = random_lp(rng, n=3, mi=3)
    while not enumerate_vertices(p):
        p = random_lp(rng, n=3, mi=3)
    verts = np.array(enumerate_vertices(p))
    for _ in range(20):
        p.c = rng.normal(size=3)
        x = solve_lp(p).x
        assert np.min(np.abs(verts - x).max(axis=1)) <= 1e-9


def test_vertex_enumeration_is_capped():
    with pytest.raises(DdwError):
        enumerate_vertices(LpProblem(np.zeros(13), upper=np.ones(13)))


def test_qp_hand_kkt():
    # max -(z-3)^2/2 = 3z - z^2/2 + const, s.t. z <= 2
    sol = solve_qp(QpProblem([3.0], [[1.0]], [[1.0]], [2.0]))
    assert sol.z[0] == pytest.approx(2.0, abs=1e-10)
    assert sol.multipliers[0] == pytest.approx(1.0, abs=1e-10)


def test_qp_unconstrained_identity():
    q = np.array([1.0, -2.0, 0.5])
    sol = solve_qp(QpProblem(q, np.eye(3), np.zeros((0, 3)), np.zeros(0)))
    np.testing.assert_allclose(sol.z, q, atol=1e-12)


def test_qp_matches_active_set_brute_force(rng):
    for _ in range(50):
        n = int(rng.integers(2, 4))
        Q = random_pd(rng, n)
        q = rng.normal(size=n) * 5
        G = np.vstack([rng.normal(size=(3, n)), np.eye(n), -np.eye(n)])
        h = np.concatenate([rng.uniform(0.1, 2.0, size=3), np.full(2 * n, 3.0)])
        best, _, _ = brute_force_qp(q, Q, G, h)
        sol = solve_qp(QpProblem(q, Q, G, h))
        assert abs(sol.objective - best) <= 1e-8 * max(1.0, abs(best))
        stat, infeas, comp = kkt_residuals(QpProblem(q, Q, G, h), sol.z, sol.multipliers)
        assert max(stat, infeas, comp) <= 1e-8
        assert np.all(sol.multipliers >= -1e-12)


def test_qp_with_linear_objective_agrees_with_lp(rng):
    for _ in range(10):
        n = 3
        c = rng.normal(size=n)
        G = np.vstack([rng.normal(size=(2, n)), np.eye(n), -np.eye(n)])
        h = np.concatenate([rng.uniform(0.5, 2.0, size=2), np.full(n, 2.0), np.full(n, 2.0)])
        qp = solve_qp(QpProblem(c, np.zeros((n, n)), G, h))
        lp = solve_lp(LpProblem(c, G=G, h=h, lower=np.full(n, -np.inf), upper=np.full(n, np.inf), sense="max"))
        assert lp.status is Status.OPTIMAL
        assert abs(qp.objective - lp.objective) <= 1e-8 * max(1.0, abs(lp.objective))


def test_qp_active_hint_is_reused():
    p = QpProblem([3.0, 1.0], np.eye(2), [[1.0, 0.0], [0.0, 1.0]], [2.0, 5.0])
    first = solve_qp(p)
    again = solve_qp(p, first.active_set())
    assert again.iterations == 0
    np.testing.assert_allclose(again.z, first.z, atol=1e-12)


def test_qp_rejects_non_finite_data():
    with pytest.raises(DimensionError):
        solve_qp(QpProblem([np.nan], [[1.0]], [[1.0]], [1.0]))
