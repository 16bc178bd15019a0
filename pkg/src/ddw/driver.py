"""Outer column-generation loop around the distributed dual master.

Per outer iteration: consensus ADMM on the restricted dual (run through a
cluster of worker hosts), then every block prices a new column at the
consensus duals. Tolerances start loose and tighten tenfold per stage; the
column acceptance threshold always uses the target dual tolerance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ddw.admm import AdmmConfig, AdmmState, DualBox, run_admm, with_tolerances
from ddw.errors import DimensionError, InvariantViolation, NonConvergence, NumericalFailure
from ddw.model import BlockAngularInstance, Sense, evaluate_primal
from ddw.solvers import LpProblem, Status, solve_lp

BOUND_ABS = 1e-6
FEAS_ABS = 1e-5
ALPHA_REL = 1e-9


@dataclass(frozen=True)
class ToleranceSchedule:
    eps_p0: float = 5e-1
    eps_d0: float = 5e-1
    factor: float = 10.0
    eps_p: float = 5e-2  # target primal residual tolerance
    eps_d: float = 5e-4  # target dual residual tolerance

    def __post_init__(self):
        if not (self.factor > 1 and min(self.eps_p, self.eps_d, self.eps_p0, self.eps_d0) > 0):
            raise ValueError("tolerances must be positive and factor > 1")

    def tolerances(self, stage: int) -> tuple[float, float]:
        f = self.factor**stage
        return max(self.eps_p0 / f, self.eps_p), max(self.eps_d0 / f, self.eps_d)

    @property
    def final_stage(self) -> int:
        s = 0
        while self.tolerances(s) != (self.eps_p, self.eps_d):
            s += 1
        return s


@dataclass
class DdwConfig:
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    schedule: ToleranceSchedule = field(default_factory=ToleranceSchedule)
    max_outer: int = 1000
    # solve each restricted dual exactly as well, to check the sandwich bound per outer iteration
    certify: bool = False


@dataclass
class ColumnRecord:
    cost: float
    link: np.ndarray

    @property
    def link_norm(self) -> float:
        return float(np.linalg.norm(self.link))


@dataclass
class OuterRecord:
    outer: int
    stage: int
    eps_p: float
    eps_d: float
    admm_iters: int
    r_p: float
    r_d: float
    z_rdm: float
    z_sep: list
    added: int
    duplicates: int
    lower_bound: float  # z_rdm + sum min(0, z_sep)
    z_rdm_exact: float | None = None


@dataclass
class BoundCheck:
    name: str
    measured: float
    budget: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.budget)

    @property
    def slack(self) -> float:
        return self.budget - self.measured


@dataclass
class DdwReport:
    status: str
    z_hat: float
    z_rdm: float
    x_hat: list
    link_residual: np.ndarray
    outer_iters: int
    admm_iters: int
    pi: np.ndarray
    u: np.ndarray
    lam_sums: np.ndarray
    trace: list
    reduced_cost_margin: float  # min over pooled columns of reduced cost + ||A^i|| eps_d
    alpha_sum_ratio: float  # max over iterations of ||sum alpha||_inf / (1 + max ||alpha_n||_inf)
    eps_p: float
    eps_d: float
    columns: int
    timings: dict
    hosts: list
    checks: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "optimal"


LAMBDA_CLAMP = 1e-9
LAMBDA_SUM_TOL = 1e-5


def recover_block(points, lam) -> np.ndarray:
    """sum_i lam_i x^i; weights above -1e-9 are clamped to 0 and renormalised."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != P.shape[0]:
        raise DimensionError(f"{lam.size} weights for {P.shape[0]} columns")
    if np.any(lam < -LAMBDA_CLAMP):
        raise InvariantViolation(f"convex weight {lam.min():.3e} is negative")
    total = float(lam.sum())
    if abs(total - 1.0) > LAMBDA_SUM_TOL:
        raise InvariantViolation(f"convex weights sum to {total!r}, not 1")
    lam = np.maximum(lam, 0.0)
    lam = lam / lam.sum()
    return P.T @ lam


def recover_primal(pools, lambdas) -> list:
    """x_hat_n = sum_i lam_ni x_n^i for each block; ``pools`` hold ColumnPools or stacked points."""
    return [recover_block(p.points() if hasattr(p, "points") else p, lam) for p, lam in zip(pools, lambdas)]


def restricted_dual_lp(t, pools: list, box: DualBox) -> LpProblem:
    """max t.pi + sum u_n  s.t.  link_i.pi + u_n <= cost_i,  pi in the common box, u free."""
    t = np.asarray(t, dtype=float)
    m, N = t.size, len(pools)
    rows = [(n, col) for n, pool in enumerate(pools) for col in pool]
    G = np.zeros((len(rows), m + N))
    h = np.empty(len(rows))
    for r, (n, col) in enumerate(rows):
        G[r, :m] = col.link
        G[r, m + n] = 1.0
        h[r] = col.cost
    lower = np.concatenate([box.lower, np.full(N, -np.inf)])
    upper = np.concatenate([box.upper, np.full(N, np.inf)])
    return LpProblem(np.concatenate([t, np.ones(N)]), G=G, h=h, lower=lower, upper=upper, sense="max")


def exact_restricted_dual(t, pools, box: DualBox) -> float:
    sol = solve_lp(restricted_dual_lp(t, pools, box))
    if sol.status is not Status.OPTIMAL:
        raise NumericalFailure(f"restricted dual LP is {sol.status.value}")
    return float(sol.objective)


def gamma_bound(instance: BlockAngularInstance) -> float:
    """sum_n ||A_n||_F L_n with L_n = || upper_n ||, a bound on every ||x^i||."""
    return float(sum(np.linalg.norm(b.A) * np.linalg.norm(np.maximum(np.abs(b.upper), np.abs(b.lower))) for b in instance.blocks))


def link_violation_norms(instance: BlockAngularInstance, residual) -> tuple[float, float]:
    """(||residual|| over equality rows, ||max(t - Ax, 0)|| over >= rows), Euclidean."""
    r = np.asarray(residual, dtype=float)
    ge = np.array([s is Sense.GE for s in instance.senses])
    return float(np.linalg.norm(r[~ge])), float(np.linalg.norm(np.maximum(-r[ge], 0.0)))


def certify_bounds(instance: BlockAngularInstance, report: DdwReport, z_star: float | None = None) -> list:
    """Check the a posteriori guarantees on a finished run."""
    N, m = instance.num_blocks, instance.num_links
    eq_norm, ge_norm = link_violation_norms(instance, report.link_residual)
    budget = N * report.eps_p + FEAS_ABS
    checks = [
        BoundCheck("feasibility_eq", eq_norm, budget, "||sum A_n x_n - t|| over equality rows <= N eps_p"),
        BoundCheck("feasibility_ge", ge_norm, budget, "||max(t - sum A_n x_n, 0)|| over >= rows <= N eps_p"),
        BoundCheck("convexity", float(np.max(np.abs(report.lam_sums - 1.0))), 1e-8, "|sum_i lam_ni - 1|"),
        BoundCheck("reduced_costs", -report.reduced_cost_margin, BOUND_ABS, "pooled reduced costs >= -||A^i|| eps_d"),
        BoundCheck("alpha_sum", report.alpha_sum_ratio, ALPHA_REL, "||sum alpha_n||_inf relative to max ||alpha_n||_inf"),
    ]
    if z_star is not None:
        M = max(b.dual_bound for b in instance.blocks)
        gamma = gamma_bound(instance)
        checks.append(
            BoundCheck(
                "optimality",
                report.z_hat - z_star,
                gamma * (report.eps_d + 1.0) + m * M * N * report.eps_p,
                f"z_hat - z* <= gamma (eps_d + 1) + m M N eps_p with gamma={gamma!r}, M=max_n 10||c_n||={M!r}",
            )
        )
        for rec in report.trace:
            if rec.z_rdm_exact is not None:
                checks.append(BoundCheck(f"sandwich_low[{rec.outer}]", rec.lower_bound - z_star, BOUND_ABS))
                checks.append(BoundCheck(f"sandwich_high[{rec.outer}]", z_star - rec.z_rdm_exact, BOUND_ABS))
    return checks


class _AlphaTracker:
    def __init__(self):
        self.ratio = 0.0

    def __call__(self, state: AdmmState):
        A = np.vstack(state.alpha_n)
        r = float(np.abs(A.sum(axis=0)).max()) / (1.0 + float(np.abs(A).max()))
        self.ratio = max(self.ratio, r)


def run_ddw(
    instance: BlockAngularInstance, cfg: DdwConfig | None = None, cluster=None, transport="local", hosts=1, observer=None
) -> DdwReport:
    """Solve ``instance`` with the distributed method; ``cluster`` defaults to an in-process one.

    ``observer(outer, state)``, if given, sees every ADMM iterate.
    """
    from ddw.runtime.coordinator import open_cluster

    cfg = cfg or DdwConfig()
    own = cluster is None
    if own:
        cluster = open_cluster(instance, transport, hosts)
    t_start = time.perf_counter()
    try:
        return _run(instance, cfg, cluster, t_start, observer)
    finally:
        if own:
            cluster.close()


def _run(instance, cfg, cluster, t_start, observer=None) -> DdwReport:
    N, m = instance.num_blocks, instance.num_links
    sched = cfg.schedule
    t = np.asarray(instance.t, dtype=float)
    common_box = DualBox.intersect([DualBox.for_block(b, instance.senses) for b in instance.blocks])
    pools = [[] for _ in range(N)]
    for r in cluster.seed():
        pools[r.worker].append(ColumnRecord(r.cost, r.link))
    tracker = _AlphaTracker()
    stage, warm, total_iters = 0, None, 0
    trace: list = []
    status = "optimal"
    state = None
    final_pools = pools
    outer = 0
    while True:
        outer += 1
        if outer > cfg.max_outer:
            status = "outer_limit"
            outer -= 1
            break
        eps_p, eps_d = sched.tolerances(stage)
        acfg = with_tolerances(cfg.admm, eps_p, eps_d)

        def step(k, pi, alpha, rho, _outer=outer, _stage=stage):
            return cluster.step(_outer, k, pi, rho, _stage)

        def watch(st, _outer=outer):
            tracker(st)
            if observer is not None:
                observer(_outer, st)

        try:
            state = run_admm(step, N, m, acfg, warm, watch)
        except NonConvergence as exc:
            state = exc.state
            total_iters += state.k
            status = "admm_nonconvergence"
            final_pools = [list(p) for p in pools]
            break
        total_iters += state.k
        snapshot = [list(p) for p in pools]
        z_exact = exact_restricted_dual(t, snapshot, common_box) if cfg.certify else None
        results = cluster.price(outer, state.k, state.pi, state.u_n, sched.eps_d)
        added = dup = 0
        for r in results:
            if r.accepted:
                pools[r.worker].append(ColumnRecord(r.cost, r.link))
                added += 1
            dup += int(r.duplicate)
        z_rdm = float(t @ state.pi + state.u_n.sum())
        z_sep = [r.z_sep for r in results]
        trace.append(
            OuterRecord(
                outer, stage, eps_p, eps_d, state.k, state.r_p, state.r_d, z_rdm, z_sep, added, dup,
                z_rdm + sum(min(0.0, z) for z in z_sep), z_exact,
            )
        )
        final_pools = snapshot
        if added == 0 or state.k == 1:
            if stage >= sched.final_stage:
                break
            stage += 1
        warm = state.warm()
    t_solve = time.perf_counter() - t_start
    recovered = cluster.recover(outer, state.k)
    x_hat = [r.x for r in recovered]
    lam_sums = np.array([r.lam_sum for r in recovered])
    hosts = {}
    for r in recovered:
        hosts[r.host] = {"host": r.host, "t_u": r.t_u, "t_c": r.t_c, "t_s": r.t_s}
    z_hat, residual = evaluate_primal(instance, x_hat)
    eps_p_fin, eps_d_fin = sched.tolerances(stage)
    margin = math.inf
    for n, pool in enumerate(final_pools):
        for col in pool:
            rc = col.cost - col.link @ state.pi - state.u_n[n]
            margin = min(margin, rc + col.link_norm * eps_d_fin)
    report = DdwReport(
        status=status,
        z_hat=z_hat,
        z_rdm=float(t @ state.pi + state.u_n.sum()),
        x_hat=x_hat,
        link_residual=residual,
        outer_iters=outer,
        admm_iters=total_iters,
        pi=state.pi.copy(),
        u=state.u_n.copy(),
        lam_sums=lam_sums,
        trace=trace,
        reduced_cost_margin=margin,
        alpha_sum_ratio=tracker.ratio,
        eps_p=eps_p_fin,
        eps_d=eps_d_fin,
        columns=sum(len(p) for p in pools),
        timings={"total": t_solve, "coordinator_comm": cluster.comm_time},
        hosts=[hosts[h] for h in sorted(hosts)],
    )
    report.checks = certify_bounds(instance, report)
    return report
