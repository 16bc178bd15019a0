"""Dense bounded-variable revised simplex.

Problems are posed as

    min/max  c.x   s.t.  G x <= h,  E x = f,  lower <= x <= upper

with possibly infinite bounds. Internally every inequality row gets a slack
``s >= 0`` and rows whose starting residual cannot be absorbed by a slack get
an artificial variable; phase 1 drives the artificials to zero, phase 2
optimises the true objective from the phase-1 basis with the artificials
fixed at zero.

Pricing is Dantzig's rule (largest |reduced cost|, lowest index on ties);
after ``STALL_LIMIT`` consecutive degenerate pivots the solver switches to
Bland's rule until a step with positive length is taken.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ddw.errors import DimensionError, NumericalFailure

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11
STALL_LIMIT = 50
REFACTOR_EVERY = 64


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LpProblem:
    c: np.ndarray
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    E: np.ndarray | None = None
    f: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    sense: str = "min"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.G = _rows(self.G, n)
        self.E = _rows(self.E, n)
        self.h = np.asarray(self.h if self.h is not None else [], dtype=float).reshape(-1)
        self.f = np.asarray(self.f if self.f is not None else [], dtype=float).reshape(-1)
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")

    @property
    def n(self) -> int:
        return self.c.size

    def defects(self) -> list[str]:
        out = []
        n = self.n
        if self.G.shape[1] != n or self.E.shape[1] != n:
            out.append("constraint matrices do not match len(c)")
        if self.G.shape[0] != self.h.size:
            out.append("G and h disagree")
        if self.E.shape[0] != self.f.size:
            out.append("E and f disagree")
        if self.lower.size != n or self.upper.size != n:
            out.append("bound vectors do not match len(c)")
        elif np.any(self.lower > self.upper):
            out.append("lower > upper")
        for name in ("c", "G", "h", "E", "f"):
            if not np.all(np.isfinite(getattr(self, name))):
                out.append(f"{name} has non-finite entries")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            out.append("NaN bound")
        return out


def _rows(a, n):
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, n) if a.size else np.zeros((0, n))


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = float("nan")
    row_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bound_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    @property
    def ineq_duals(self):
        return self.row_duals[: self._mi]

    @property
    def eq_duals(self):
        return self.row_duals[self._mi :]

    _mi: int = 0


class _Simplex:
    def __init__(self, A, b, cost, lower, upper, basis, x):
        self.A = A
        self.b = b
        self.cost = cost
        self.lower = lower
        self.upper = upper
        self.basis = basis
        self.x = x
        self.rows, self.cols = A.shape
        self.iterations = 0
        self.max_iter = 50 * (self.rows + self.cols) + 1000
        self.scale = 1.0 + (np.abs(b).max() if b.size else 0.0)
        self.refactor()

    def refactor(self):
        if self.rows == 0:
            self.Binv = np.zeros((0, 0))
            return
        Bm = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(Bm)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis matrix") from exc
        if not np.all(np.isfinite(self.Binv)):
            raise NumericalFailure("singular basis matrix")
        nonbasic = np.ones(self.cols, dtype=bool)
        nonbasic[self.basis] = False
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ rhs
        self.since_refactor = 0

    def run(self, cost):
        """Optimise ``cost`` from the current basis; return 'optimal' or 'unbounded'."""
        opt_tol = OPT_TOL * (1.0 + np.abs(cost).max()) if cost.size else OPT_TOL
        is_basic = np.zeros(self.cols, dtype=bool)
        is_basic[self.basis] = True
        stall = 0
        bland = False
        while True:
            if self.iterations > self.max_iter:
                raise NumericalFailure(f"simplex iteration cap {self.max_iter} exhausted")
            y = cost[self.basis] @ self.Binv if self.rows else np.zeros(0)
            d = cost - y @ self.A if self.rows else cost.copy()
            x, lo, up = self.x, self.lower, self.upper
            can_up = (d < -opt_tol) & (x < up - FEAS_TOL)
            can_dn = (d > opt_tol) & (x > lo + FEAS_TOL)
            eligible = (can_up | can_dn) & ~is_basic
            cand = np.flatnonzero(eligible)
            if cand.size == 0:
                self.y, self.d = y, d
                return "optimal"
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[j] < 0 else -1.0
            w = self.Binv @ self.A[:, j] if self.rows else np.zeros(0)
            delta = -direction * w  # change of x_B per unit step of x_j
            theta = up[j] - lo[j]
            leave = -1
            leave_to = 0.0
            if self.rows:
                xb = x[self.basis]
                lb = lo[self.basis]
                ub = up[self.basis]
                ratios = np.full(self.rows, np.inf)
                dec = delta < -PIVOT_TOL
                inc = delta > PIVOT_TOL
                with np.errstate(invalid="ignore", divide="ignore"):
                    ratios[dec] = (xb[dec] - lb[dec]) / -delta[dec]
                    ratios[inc] = (ub[inc] - xb[inc]) / delta[inc]
                ratios = np.maximum(ratios, 0.0)
                rmin = ratios.min()
                if rmin < theta:
                    ties = np.flatnonzero(ratios <= rmin + 1e-12)
                    if bland:
                        r = int(ties[np.argmin(self.basis[ties])])
                    else:
                        r = int(ties[np.argmax(np.abs(delta[ties]))])
                    theta = ratios[r]
                    leave = r
                    leave_to = lb[r] if delta[r] < 0 else ub[r]
            if not np.isfinite(theta):
                return "unbounded"
            self.iterations += 1
            if theta <= 1e-12:
                stall += 1
                if stall >= STALL_LIMIT:
                    bland = True
            else:
                stall = 0
                bland = False
            if self.rows:
                self.x[self.basis] += theta * delta
            self.x[j] += direction * theta
            if leave < 0:
                # bound flip, basis unchanged; snap to the bound to avoid drift
                self.x[j] = up[j] if direction > 0 else lo[j]
                continue
            out = self.basis[leave]
            self.x[out] = leave_to
            is_basic[out] = False
            is_basic[j] = True
            self.basis[leave] = j
            piv = w[leave]
            if abs(piv) < PIVOT_TOL:
                raise NumericalFailure("pivot element vanished")
            row = self.Binv[leave] / piv
            self.Binv -= np.outer(w, row)
            self.Binv[leave] = row
            self.since_refactor += 1
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()


def _initial_point(lower, upper):
    x = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
    return x.astype(float)


def solve_lp(p: LpProblem) -> LpSolution:
    """Solve ``p``; the result is a deterministic function of the input bytes."""
    bad = p.defects()
    if bad:
        raise DimensionError("; ".join(bad))
    n = p.n
    mi, me = p.G.shape[0], p.E.shape[0]
    rows = mi + me
    sign = 1.0 if p.sense == "min" else -1.0
    c = sign * p.c

    x0 = _initial_point(p.lower, p.upper)
    M = np.vstack([p.G, p.E]) if rows else np.zeros((0, n))
    rhs = np.concatenate([p.h, p.f])
    resid = rhs - M @ x0 if rows else np.zeros(0)

    # slacks for G rows; the slack is basic where it can absorb the residual
    need_art = np.ones(rows, dtype=bool)
    need_art[:mi] = resid[:mi] < 0
    art_rows = np.flatnonzero(need_art)
    na = art_rows.size
    A = np.zeros((rows, n + mi + na))
    A[:, :n] = M
    A[np.arange(mi), n + np.arange(mi)] = 1.0
    art_sign = np.where(resid[art_rows] >= 0, 1.0, -1.0)
    A[art_rows, n + mi + np.arange(na)] = art_sign
    lower = np.concatenate([p.lower, np.zeros(mi + na)])
    upper = np.concatenate([p.upper, np.full(mi + na, np.inf)])
    x = np.concatenate([x0, np.zeros(mi + na)])
    basis = np.empty(rows, dtype=np.int64)
    slack_basic = np.flatnonzero(~need_art[:mi])
    basis[slack_basic] = n + slack_basic
    basis[art_rows] = n + mi + np.arange(na)

    spx = _Simplex(A, rhs, None, lower, upper, basis, x)
    total_cols = n + mi + na
    if na:
        phase1 = np.zeros(total_cols)
        phase1[n + mi :] = 1.0
        spx.run(phase1)
        infeas = spx.x[n + mi :].sum()
        if infeas > FEAS_TOL * spx.scale * max(1.0, np.sqrt(na)):
            return LpSolution(Status.INFEASIBLE, iterations=spx.iterations, _mi=mi)
        spx.upper[n + mi :] = 0.0
        spx.x[n + mi :] = np.clip(spx.x[n + mi :], 0.0, 0.0)
        spx.refactor()
    cost = np.concatenate([c, np.zeros(mi + na)])
    if spx.run(cost) == "unbounded":
        return LpSolution(Status.UNBOUNDED, iterations=spx.iterations, _mi=mi)
    spx.refactor()
    # re-price at the refactored basis so duals match the final x
    spx.run(cost)

    xs = spx.x[:n].copy()
    xs = np.minimum(np.maximum(xs, p.lower), p.upper)
    y = spx.y if rows else np.zeros(0)
    d = spx.d[:n]
    return LpSolution(
        Status.OPTIMAL,
        x=xs,
        objective=float(p.c @ xs),
        row_duals=sign * y,
        bound_duals=sign * d,
        iterations=spx.iterations,
        _mi=mi,
    )
