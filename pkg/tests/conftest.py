from __future__ import annotations

import itertools

import numpy as np
import pytest

from ddw.instgen import GenSpec, generate_feasible
from ddw.model import BlockAngularInstance, BlockData, Sense
from ddw.solvers import LpProblem


def box_block(c, A, upper=30.0, B=None, b=None) -> BlockData:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    d = c.size
    B = np.zeros((0, d)) if B is None else B
    b = np.zeros(0) if b is None else b
    return BlockData(c, B, b, np.zeros(d), np.full(d, upper), A)


def random_instance(rng, N=2, d=3, m=2, senses=None) -> BlockAngularInstance:
    """A small instance that is feasible by construction (t is A of an interior point)."""
    blocks, x0 = [], []
    for _ in range(N):
        A = rng.integers(-5, 10, size=(m, d)).astype(float)
        B = rng.integers(-5, 10, size=(2, d)).astype(float)
        x = rng.uniform(1.0, 9.0, size=d)
        b = B @ x + rng.uniform(0.5, 5.0, size=2)
        c = rng.integers(-10, 30, size=d).astype(float)
        blocks.append(BlockData(c, B, b, np.zeros(d), np.full(d, 10.0), A))
        x0.append(x)
    t = sum(blk.A @ x for blk, x in zip(blocks, x0))
    senses = senses or [Sense.GE] * m
    if any(Sense(s) is Sense.GE for s in senses):
        t = np.where([Sense(s) is Sense.GE for s in senses], t - 1.0, t)
    return BlockAngularInstance(t, senses, blocks, {"seed": None})


def desk_instance(seed, N=2, total=10, m=1):
    return generate_feasible(GenSpec.from_total(seed, N, total, m))[0]


def brute_force_qp(q, Q, G, h, tol=1e-9):
    """max q.z - z'Qz/2 s.t. Gz <= h by trying every active set.

    Returns (value, z, lam) with lam over all rows; singular KKT systems are skipped.
    """
    n = q.size
    best, best_z, best_lam = -np.inf, None, None
    rows = range(G.shape[0])
    for k in range(0, min(n, G.shape[0]) + 1):
        for W in itertools.combinations(rows, k):
            W = list(W)
            GW = G[W]
            K = np.block([[Q, GW.T], [GW, np.zeros((k, k))]])
            rhs = np.concatenate([q, h[W]])
            if np.linalg.cond(K) > 1e12:
                continue
            sol = np.linalg.solve(K, rhs)
            z = sol[:n]
            if np.any(G @ z > h + tol * (1 + np.abs(h).max())):
                continue
            val = q @ z - 0.5 * z @ Q @ z
            if val > best + tol * (1 + abs(val)) or (val > best - tol * (1 + abs(val)) and np.all(sol[n:] >= -tol)):
                lam = np.zeros(G.shape[0])
                lam[W] = sol[n:]
                best, best_z, best_lam = val, z, lam
    return best, best_z, best_lam


def random_pd(rng, n):
    R = rng.normal(size=(n, n))
    return R @ R.T + 0.5 * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_lp(rng, n=4, mi=4, me=0, sense="min"):
    G = rng.integers(-5, 6, size=(mi, n)).astype(float)
    h = rng.integers(-2, 15, size=mi).astype(float)
    E = rng.integers(-3, 4, size=(me, n)).astype(float)
    x0 = rng.uniform(0, 5, size=n)
    f = E @ x0
    c = rng.integers(-9, 10, size=n).astype(float)
    return LpProblem(c, G=G, h=h, E=E, f=f, lower=np.zeros(n), upper=np.full(n, 5.0), sense=sense)


def lp_dual_objective(p: LpProblem, sol) -> float:
    """Objective of the Lagrangian dual built from the reported multipliers."""
    y = sol.row_duals
    d = sol.bound_duals
    rhs = np.concatenate([p.h, p.f])
    val = float(rhs @ y)
    sign = 1.0 if p.sense == "min" else -1.0
    for j in range(p.n):
        # for a min problem a positive reduced cost pins x_j at its lower bound
        bound = p.lower[j] if sign * d[j] > 0 else p.upper[j]
        if d[j] != 0:
            val += d[j] * bound
    return val


def check_lp_kkt(p: LpProblem, sol, tol=1e-8):
    x = sol.x
    scale = 1.0 + np.abs(p.c).sum() * (1 + np.abs(x).max())
    assert np.all(p.G @ x <= p.h + tol * (1 + np.abs(p.h).max()))
    np.testing.assert_allclose(p.E @ x, p.f, atol=tol * (1 + np.abs(p.f).max(initial=0)))
    assert np.all(x >= p.lower - tol) and np.all(x <= p.upper + tol)
    # stationarity c = M'y + d
    M = np.vstack([p.G, p.E])
    np.testing.assert_allclose(M.T @ sol.row_duals + sol.bound_duals, p.c, atol=tol * scale)
    sign = 1.0 if p.sense == "min" else -1.0
    yg = sign * sol.row_duals[: p.G.shape[0]]
    assert np.all(yg <= tol * scale)
    assert abs(lp_dual_objective(p, sol) - sol.objective) <= tol * max(1.0, abs(sol.objective))
