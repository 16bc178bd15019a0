"""Consensus ADMM on the restricted dual master.

Each block n keeps a copy pi_n of the linking dual and solves

    max  (1/N) t.pi_n + u_n + alpha_n.(pi - pi_n) - rho/2 ||pi - pi_n||^2
    s.t. A_n^i.pi_n + u_n <= c_n^i   for every pooled column i
         dual box bounds on pi_n

after which the coordinator averages the copies (closed form), updates the
copy multipliers alpha_n and adapts rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ddw.errors import InvariantViolation, NonConvergence
from ddw.model import BlockData, ColumnPool, Sense
from ddw.solvers import QpProblem, solve_qp


@dataclass(frozen=True)
class DualBox:
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def for_block(cls, block: BlockData, senses: Sequence[Sense]) -> "DualBox":
        """[-M_n, M_n] for equality rows and [0, M_n] for >= rows, M_n = 10||c_n||."""
        M = block.dual_bound
        upper = np.full(len(senses), M)
        lower = np.array([-M if Sense(s) is Sense.EQ else 0.0 for s in senses])
        return cls(lower, upper)

    @classmethod
    def intersect(cls, boxes: Sequence["DualBox"]) -> "DualBox":
        return cls(np.max([b.lower for b in boxes], axis=0), np.min([b.upper for b in boxes], axis=0))


@dataclass
class AdmmConfig:
    eps_p: float = 5e-2
    eps_d: float = 5e-4
    rho0: float = 100.0
    mu: float = 100.0
    tau_inc: float = 2.0
    tau_dec: float = 2.0
    max_iters: int = 20000
    # residual balancing is switched off after this many iterations of one
    # solve; unbounded adaptation can keep ADMM from settling
    adapt_iters: int = 100
    # "both": stop once r_d <= eps_d and r_p <= eps_p.
    # "either": literal reading of the loop guard, stop once one of them holds.
    guard: str = "both"

    def __post_init__(self):
        for name in ("eps_p", "eps_d", "rho0", "tau_inc", "tau_dec"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.adapt_iters < 0:
            raise ValueError("adapt_iters must be non-negative")
        if not self.mu > 1:
            raise ValueError("mu must exceed 1")
        if self.guard not in ("both", "either"):
            raise ValueError("guard must be 'both' or 'either'")

    def converged(self, r_p: float, r_d: float) -> bool:
        if self.guard == "both":
            return r_d <= self.eps_d and r_p <= self.eps_p
        return r_d <= self.eps_d or r_p <= self.eps_p


@dataclass
class AdmmState:
    k: int
    pi: np.ndarray
    pi_n: list
    u_n: np.ndarray
    alpha_n: list
    rho: float  # penalty used during iteration k
    r_p: float
    r_d: float
    rho_next: float = float("nan")
    pi_prev: np.ndarray | None = None

    def warm(self, keep_rho: bool = False) -> "WarmStart":
        """Warm start from this iterate; the penalty restarts at rho0 unless `keep_rho`."""
        rho = self.rho_next if keep_rho else None
        return WarmStart(self.pi.copy(), [a.copy() for a in self.alpha_n], rho)


@dataclass
class WarmStart:
    pi: np.ndarray
    alpha_n: list
    rho: float | None = None


@dataclass
class WorkerDual:
    pi_n: np.ndarray
    u_n: float
    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))
    active: tuple | None = None  # (pool size, active QP rows, pi_n), reusable as a hint

    @property
    def lam_sum(self) -> float:
        return float(self.lam.sum())


def rdm_objective(t, state: AdmmState) -> float:
    return float(np.asarray(t) @ state.pi + state.u_n.sum())


def build_worker_qp(pool: ColumnPool, t_share, pi_k, alpha_k, rho, box: DualBox) -> QpProblem:
    """The per-block augmented-Lagrangian QP in z = (pi_n, u_n)."""
    m = pi_k.size
    links = pool.links()
    K = len(pool)
    Q = np.zeros((m + 1, m + 1))
    Q[np.arange(m), np.arange(m)] = rho
    q = np.empty(m + 1)
    q[:m] = t_share - alpha_k + rho * pi_k
    q[m] = 1.0
    G = np.zeros((K + 2 * m, m + 1))
    G[:K, :m] = links
    G[:K, m] = 1.0
    G[K + np.arange(m), np.arange(m)] = 1.0
    G[K + m + np.arange(m), np.arange(m)] = -1.0
    h = np.concatenate([pool.costs(), box.upper, -box.lower])
    return QpProblem(q, Q, G, h)


def worker_step(pool: ColumnPool, t_share, pi_k, alpha_k, rho: float, box: DualBox, hint=None) -> WorkerDual:
    """Solve one block's subproblem; lam are the multipliers of the column rows."""
    if len(pool) == 0:
        raise InvariantViolation(f"block {pool.block_id}: worker step with an empty column pool")
    if not rho > 0:
        raise ValueError("rho must be positive")
    pi_k = np.asarray(pi_k, dtype=float)
    m = pi_k.size
    K = len(pool)
    qp_hint = None
    pi0 = np.zeros(m)
    if hint is not None:
        # hint rows past the columns are box rows; shift them if the pool grew
        k_old, rows, pi0 = hint
        rows = np.asarray(rows)
        qp_hint = np.where(rows >= k_old, rows + (K - k_old), rows)
    # any pi in the box with u at the lowest column slack is feasible
    pi0 = np.clip(pi0, box.lower, box.upper)
    start = np.append(pi0, np.min(pool.costs() - pool.links() @ pi0))
    qp = build_worker_qp(pool, t_share, pi_k, np.asarray(alpha_k, dtype=float), rho, box)
    sol = solve_qp(qp, qp_hint, start)
    pi_n = sol.z[:m].copy()
    return WorkerDual(pi_n, float(sol.z[m]), sol.multipliers[:K].copy(), (K, sol.active_set(), pi_n))


def consensus_update(pi_list, alpha_list, rho: float) -> np.ndarray:
    """pi = mean(pi_n) + sum(alpha_n) / (N rho), reduced in worker order."""
    N = len(pi_list)
    P = np.vstack(pi_list)
    A = np.vstack(alpha_list)
    return P.sum(axis=0) / N + A.sum(axis=0) / (N * rho)


def multiplier_update(alpha, rho: float, pi_new, pi_n_new) -> np.ndarray:
    return np.asarray(alpha) - rho * (np.asarray(pi_new) - np.asarray(pi_n_new))


def residuals(pi_new, pi_n_list, pi_old, rho: float) -> tuple[float, float]:
    """(r_d, r_p): consensus gap sqrt(sum ||pi - pi_n||^2) and rho ||pi_new - pi_old||."""
    gaps = np.vstack([pi_new - pn for pn in pi_n_list])
    r_d = math.sqrt(float(np.sum(gaps * gaps)))
    r_p = rho * float(np.linalg.norm(np.asarray(pi_new) - np.asarray(pi_old)))
    return r_d, r_p


def adapt_rho(rho: float, r_p: float, r_d: float, cfg: AdmmConfig) -> float:
    if r_d > cfg.mu * r_p:
        return cfg.tau_inc * rho
    if r_p > cfg.mu * r_d:
        return rho / cfg.tau_dec
    return rho


StepFn = Callable[[int, np.ndarray, list, float], list]


def run_admm(
    step: StepFn,
    num_blocks: int,
    num_links: int,
    cfg: AdmmConfig,
    warm: WarmStart | None = None,
    observer: Callable[[AdmmState], None] | None = None,
) -> AdmmState:
    """Generic coordinator loop; ``step(k, pi, alpha_n, rho)`` returns N WorkerDuals in order."""
    if warm is None:
        pi = np.zeros(num_links)
        alpha = [np.zeros(num_links) for _ in range(num_blocks)]
        rho = cfg.rho0
    else:
        pi = np.array(warm.pi, dtype=float)
        alpha = [np.array(a, dtype=float) for a in warm.alpha_n]
        rho = cfg.rho0 if warm.rho is None or not np.isfinite(warm.rho) else float(warm.rho)
    state = None
    for k in range(1, cfg.max_iters + 1):
        duals = step(k, pi, alpha, rho)
        pi_n = [d.pi_n for d in duals]
        pi_new = consensus_update(pi_n, alpha, rho)
        alpha_new = [multiplier_update(a, rho, pi_new, pn) for a, pn in zip(alpha, pi_n)]
        r_d, r_p = residuals(pi_new, pi_n, pi, rho)
        rho_next = adapt_rho(rho, r_p, r_d, cfg) if k <= cfg.adapt_iters else rho
        state = AdmmState(
            k, pi_new, pi_n, np.array([d.u_n for d in duals]), alpha_new, rho, r_p, r_d, rho_next, pi
        )
        if observer is not None:
            observer(state)
        pi, alpha = pi_new, alpha_new
        if cfg.converged(r_p, r_d):
            return state
        rho = rho_next
    raise NonConvergence(
        f"ADMM did not converge in {cfg.max_iters} iterations (r_p={state.r_p:.3e}, r_d={state.r_d:.3e})",
        state=state,
    )


@dataclass
class RdmResult:
    state: AdmmState
    lambdas: list
    iterations: int


def solve_rdm(
    pools: Sequence[ColumnPool],
    t,
    boxes: Sequence[DualBox],
    cfg: AdmmConfig,
    warm: WarmStart | None = None,
    observer=None,
) -> RdmResult:
    """In-process consensus ADMM over ``pools``; returns the final state and lambdas."""
    N = len(pools)
    t = np.asarray(t, dtype=float)
    if any(len(p) == 0 for p in pools):
        raise InvariantViolation("every pool must hold at least one column")
    t_share = t / N
    hints = [None] * N
    last: list = [None] * N

    def step(k, pi, alpha, rho):
        out = []
        for n, pool in enumerate(pools):
            d = worker_step(pool, t_share, pi, alpha[n], rho, boxes[n], hints[n])
            hints[n] = d.active
            last[n] = d
            out.append(d)
        return out

    try:
        state = run_admm(step, N, t.size, cfg, warm, observer)
    except NonConvergence as exc:
        exc.lambdas = [d.lam for d in last]
        raise
    return RdmResult(state, [d.lam for d in last], state.k)


def with_tolerances(cfg: AdmmConfig, eps_p: float, eps_d: float) -> AdmmConfig:
    return replace(cfg, eps_p=eps_p, eps_d=eps_d)
