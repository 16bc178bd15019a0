"""Reference solvers: the monolithic LP and centrally-solved Dantzig-Wolfe."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ddw.errors import InvariantViolation, NumericalFailure
from ddw.model import BlockAngularInstance, Column, ColumnPool, Sense
from ddw.pricing import block_lp, seed_initial_column
from ddw.solvers import LpProblem, LpSolution, Status, solve_lp

REDUCED_COST_TOL = 1e-9


def _offsets(instance):
    return np.cumsum([0] + [blk.dim for blk in instance.blocks])


def direct_lp(instance: BlockAngularInstance) -> LpProblem:
    """The whole block-angular LP as one dense problem."""
    off = _offsets(instance)
    n = int(off[-1])
    m = instance.num_links
    ge = np.array([s is Sense.GE for s in instance.senses])
    A = np.zeros((m, n))
    local_rows = sum(blk.B.shape[0] for blk in instance.blocks)
    Bfull = np.zeros((local_rows, n))
    bfull = np.zeros(local_rows)
    r = 0
    for k, blk in enumerate(instance.blocks):
        A[:, off[k] : off[k + 1]] = blk.A
        rows = blk.B.shape[0]
        Bfull[r : r + rows, off[k] : off[k + 1]] = blk.B
        bfull[r : r + rows] = blk.b
        r += rows
    G = np.vstack([Bfull, -A[ge]])
    h = np.concatenate([bfull, -instance.t[ge]])
    return LpProblem(
        np.concatenate([blk.c for blk in instance.blocks]),
        G=G,
        h=h,
        E=A[~ge],
        f=instance.t[~ge],
        lower=np.concatenate([blk.lower for blk in instance.blocks]),
        upper=np.concatenate([blk.upper for blk in instance.blocks]),
    )


def split_blocks(instance, x) -> list:
    off = _offsets(instance)
    return [x[off[k] : off[k + 1]].copy() for k in range(instance.num_blocks)]


def solve_direct(instance: BlockAngularInstance) -> LpSolution:
    return solve_lp(direct_lp(instance))


@dataclass
class ClassicalResult:
    z: float
    x_hat: list
    iterations: int
    columns: int
    timings: dict = field(default_factory=dict)
    artificial_mass: float = 0.0
    pi: np.ndarray | None = None
    u: np.ndarray | None = None


def _rmp(instance, pools, big_m):
    """Restricted master with elastic artificials priced at big_m."""
    m, N = instance.num_links, instance.num_blocks
    cols = [(n, col) for n, pool in enumerate(pools) for col in pool]
    K = len(cols)
    ge = np.array([s is Sense.GE for s in instance.senses])
    eq = ~ge
    n_plus = m  # y+ on every linking row
    n_minus = int(eq.sum())  # y- only where the row is an equality
    nv = K + n_plus + n_minus
    L = np.zeros((m, nv))
    for j, (_, col) in enumerate(cols):
        L[:, j] = col.link
    L[np.arange(m), K + np.arange(m)] = 1.0
    L[np.flatnonzero(eq), K + n_plus + np.arange(n_minus)] = -1.0
    conv = np.zeros((N, nv))
    for j, (n, _) in enumerate(cols):
        conv[n, j] = 1.0
    cost = np.concatenate([[col.cost for _, col in cols], np.full(n_plus + n_minus, big_m)])
    p = LpProblem(cost, G=-L[ge], h=-instance.t[ge], E=np.vstack([L[eq], conv]), f=np.concatenate([instance.t[eq], np.ones(N)]))
    return p, cols, ge


def solve_classical_dwd(instance: BlockAngularInstance, max_rounds: int = 10000) -> ClassicalResult:
    """Textbook column generation with an exact central master."""
    N, m = instance.num_blocks, instance.num_links
    big_m = 10.0 * max(blk.dual_bound / 10.0 for blk in instance.blocks)
    t_master = t_price = 0.0
    t0 = time.perf_counter()
    pools = [ColumnPool(n) for n in range(N)]
    for n, blk in enumerate(instance.blocks):
        pools[n].add(seed_initial_column(n, blk))
    t_price += time.perf_counter() - t0
    for rounds in range(1, max_rounds + 1):
        t0 = time.perf_counter()
        p, cols, ge = _rmp(instance, pools, big_m)
        sol = solve_lp(p)
        t_master += time.perf_counter() - t0
        if sol.status is not Status.OPTIMAL:
            raise NumericalFailure(f"restricted master is {sol.status.value}")
        n_ge = int(ge.sum())
        pi = np.zeros(m)
        # G rows hold -A x <= -t, so the >= duals are the negated G duals
        pi[ge] = -sol.row_duals[:n_ge]
        n_eq_link = m - n_ge
        pi[~ge] = sol.row_duals[n_ge : n_ge + n_eq_link]
        u = sol.row_duals[n_ge + n_eq_link :]
        t0 = time.perf_counter()
        added = 0
        for n, blk in enumerate(instance.blocks):
            res = solve_lp(block_lp(blk, blk.c - blk.A.T @ pi))
            z = res.objective - u[n]
            if z < -REDUCED_COST_TOL * max(1.0, abs(u[n])):
                if pools[n].add(Column.from_point(n, blk, res.x)):
                    added += 1
        t_price += time.perf_counter() - t0
        if not added:
            break
    else:
        raise NumericalFailure(f"classical DW did not converge in {max_rounds} rounds")
    K = len(cols)
    art = float(sol.x[K:].sum())
    if art > 1e-7 * max(1.0, float(np.abs(instance.t).max())):
        raise InvariantViolation(f"artificial variables remain positive ({art:.3e}); big-M too small or infeasible")
    lam = sol.x[:K]
    x_hat = [np.zeros(blk.dim) for blk in instance.blocks]
    for j, (n, col) in enumerate(cols):
        x_hat[n] += lam[j] * col.x
    z = float(sum(blk.c @ x for blk, x in zip(instance.blocks, x_hat)))
    return ClassicalResult(
        z, x_hat, rounds, K, {"master": t_master, "pricing": t_price, "total": t_master + t_price}, art, pi, u
    )
