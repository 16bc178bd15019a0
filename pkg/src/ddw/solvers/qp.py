"""Concave QP  max q.z - 1/2 z'Qz  s.t.  G z <= h,  Q positive semidefinite.

The main path is a primal active-set method on min 1/2 z'Qz - q.z, started
from a feasible point (the caller's, or a vertex from an LP phase 1). Zero
curvature directions are followed as rays until a row blocks them. A caller
may pass an ``active_hint`` (typically the previous active set): if it
already yields a KKT point nothing else runs, otherwise it seeds the working
set. A Mehrotra predictor-corrector interior point method, followed by
active-set polishing, is the fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddw.errors import DimensionError, NumericalFailure, UnboundedProblem
from ddw.solvers.lp import LpProblem, Status, solve_lp

STEP_FRACTION = 0.995
MU_TOL = 1e-10
RES_TOL = 1e-10
MAX_ITER = 200
KKT_TOL = 1e-9
FEAS_TOL = 1e-10


@dataclass
class QpProblem:
    q: np.ndarray
    Q: np.ndarray
    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        n = self.q.size
        self.Q = np.asarray(self.Q, dtype=float).reshape(n, n)
        G = np.asarray(self.G, dtype=float)
        self.G = G.reshape(-1, n) if G.size else np.zeros((0, n))
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        if self.G.shape[0] != self.h.size:
            raise DimensionError("G and h disagree")

    def objective(self, z) -> float:
        return float(self.q @ z - 0.5 * z @ self.Q @ z)


@dataclass
class QpSolution:
    z: np.ndarray
    objective: float
    multipliers: np.ndarray
    iterations: int = 0
    polished: bool = False

    def active_set(self, tol=1e-12):
        return np.flatnonzero(self.multipliers > tol)


def kkt_residuals(p: QpProblem, z, lam) -> tuple[float, float, float]:
    """(stationarity, primal infeasibility, max |lambda_i * slack_i|), infinity norms."""
    stat = p.Q @ z - p.q + p.G.T @ lam
    slack = p.h - p.G @ z
    infeas = max(0.0, float(-slack.min())) if slack.size else 0.0
    comp = float(np.abs(lam * slack).max()) if slack.size else 0.0
    return float(np.abs(stat).max()) if stat.size else 0.0, infeas, comp


def _scale(p: QpProblem) -> float:
    s = 1.0
    if p.q.size:
        s = max(s, np.abs(p.q).max())
    if p.h.size:
        s = max(s, np.abs(p.h).max())
    return s


def _accept(p, z, lam, tol) -> bool:
    if np.any(lam < -tol):
        return False
    stat, infeas, comp = kkt_residuals(p, z, np.maximum(lam, 0.0))
    s = _scale(p)
    return stat <= tol * s and infeas <= tol * s and comp <= tol * s


def _solve_active(p: QpProblem, active: np.ndarray):
    """Solve the KKT system with ``active`` rows held as equalities."""
    n = p.q.size
    Ga = p.G[active]
    k = active.size
    K = np.zeros((n + k, n + k))
    K[:n, :n] = p.Q
    K[:n, n:] = Ga.T
    K[n:, :n] = Ga
    rhs = np.concatenate([p.q, p.h[active]])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        if not np.allclose(K @ sol, rhs, atol=1e-10 * _scale(p)):
            return None
    z = sol[:n]
    lam = np.zeros(p.h.size)
    lam[active] = sol[n:]
    return z, lam


def _try_active(p, active, tol=KKT_TOL):
    out = _solve_active(p, np.asarray(active, dtype=np.int64))
    if out is None:
        return None
    z, lam = out
    if not _accept(p, z, lam, tol):
        return None
    lam = np.maximum(lam, 0.0)
    return z, lam


def _check_unbounded(p: QpProblem):
    # a coordinate untouched by Q must be capped by some row in the direction q pushes it
    diag_zero = np.all(p.Q == 0.0, axis=0)
    for j in np.flatnonzero(diag_zero):
        if p.q[j] > 0 and not np.any(p.G[:, j] > 0):
            raise UnboundedProblem(f"coordinate {j} is unbounded above: seed at least one constraint row")
        if p.q[j] < 0 and not np.any(p.G[:, j] < 0):
            raise UnboundedProblem(f"coordinate {j} is unbounded below: seed at least one constraint row")


def _ipm(p: QpProblem):
    # unit-norm rows keep the Newton system balanced when columns and box rows differ in scale
    norms = np.linalg.norm(p.G, axis=1) if p.h.size else np.zeros(0)
    norms[norms == 0.0] = 1.0
    z, lam, it = _ipm_scaled(QpProblem(p.q, p.Q, p.G / norms[:, None], p.h / norms))
    return z, lam / norms, it


def _ipm_scaled(p: QpProblem):
    n = p.q.size
    rows = p.h.size
    Q, q, G, h = p.Q, p.q, p.G, p.h
    if rows == 0:
        try:
            z = np.linalg.solve(Q, q)
        except np.linalg.LinAlgError as exc:
            raise UnboundedProblem("unconstrained QP with singular Q") from exc
        return z, np.zeros(0), 0
    scale = _scale(p)
    # least-squares start shifted into the interior, as in Mehrotra's heuristic
    z = np.linalg.lstsq(Q + G.T @ G, q + G.T @ h, rcond=None)[0]
    s = h - G @ z
    s = s + max(-1.5 * float(s.min()), 0.0)
    lam = np.ones(rows)
    sl = float(s @ lam)
    s = s + 0.5 * sl / lam.sum()
    lam = lam + 0.5 * sl / s.sum()
    for it in range(1, MAX_ITER + 1):
        r_d = Q @ z - q + G.T @ lam
        r_p = G @ z + s - h
        mu = s @ lam / rows
        if (
            np.abs(r_d).max() <= RES_TOL * scale
            and np.abs(r_p).max() <= RES_TOL * scale
            and mu <= MU_TOL * scale
        ):
            return z, lam, it
        if not np.all(np.isfinite(z)) or np.abs(z).max() > 1e10 * scale:
            raise UnboundedProblem("interior point iterates diverged")
        W = lam / s
        H = Q + (G.T * W) @ G
        try:
            L = np.linalg.cholesky(H)
            solve = lambda rhs: np.linalg.solve(L.T, np.linalg.solve(L, rhs))  # noqa: E731
        except np.linalg.LinAlgError:
            Hr = H + 1e-12 * scale * np.eye(n)
            solve = lambda rhs: np.linalg.lstsq(Hr, rhs, rcond=None)[0]  # noqa: E731

        def direction(r_c):
            dz = solve(-r_d - G.T @ (W * r_p - r_c / s))
            dlam = W * (G @ dz + r_p) - r_c / s
            ds = -(r_c + s * dlam) / lam
            return dz, ds, dlam

        def max_step(v, dv):
            neg = dv < 0
            if not np.any(neg):
                return 1.0
            return min(1.0, float(np.min(-v[neg] / dv[neg])))

        r_c = s * lam
        dz_a, ds_a, dl_a = direction(r_c)
        a_aff = min(max_step(s, ds_a), max_step(lam, dl_a))
        mu_aff = (s + a_aff * ds_a) @ (lam + a_aff * dl_a) / rows
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        r_c = s * lam + ds_a * dl_a - sigma * mu
        dz, ds, dl = direction(r_c)
        a = STEP_FRACTION * min(max_step(s, ds), max_step(lam, dl))
        a = min(a, 1.0)
        z = z + a * dz
        s = s + a * ds
        lam = lam + a * dl
    raise NumericalFailure(f"interior point method did not converge in {MAX_ITER} iterations")


def _feasible_start(p: QpProblem, start):
    tol = FEAS_TOL * _scale(p)
    if start is not None:
        z = np.asarray(start, dtype=float)
        if z.size == p.q.size and np.all(p.G @ z <= p.h + tol):
            return z.copy()
    n = p.q.size
    sol = solve_lp(LpProblem(np.zeros(n), G=p.G, h=p.h, lower=np.full(n, -np.inf), upper=np.full(n, np.inf)))
    if sol.status is not Status.OPTIMAL:
        raise DimensionError("QP constraints are infeasible")
    return sol.x


def _independent(rows: np.ndarray) -> bool:
    sv = np.linalg.svd(rows, compute_uv=False)
    return sv.size == rows.shape[0] and sv[-1] > 1e-10 * max(1.0, sv[0])


def _primal_active_set(p: QpProblem, z, working=(), max_iter=None):
    """Returns (z, lam, iterations) or None if the iteration cap is hit."""
    Q, q, G, h = p.Q, p.q, p.G, p.h
    n, rows = q.size, h.size
    scale = _scale(p)
    row_norm = np.linalg.norm(G, axis=1) if rows else np.zeros(0)
    tol = FEAS_TOL * scale
    W: list = []
    slack = h - G @ z
    for i in working:
        i = int(i)
        if 0 <= i < rows and i not in W and abs(slack[i]) <= tol * max(1.0, row_norm[i]):
            if _independent(G[W + [i]]):
                W.append(i)
    max_iter = max_iter or 20 * (n + rows) + 50
    at_min = False  # an unblocked full step lands on the minimiser of the current face
    for it in range(1, max_iter + 1):
        g = Q @ z - q
        if at_min:
            Z = np.zeros((n, 0))
        elif W:
            _, sv, Vt = np.linalg.svd(G[W])
            rank = int(np.sum(sv > 1e-12 * max(1.0, sv[0])))
            Z = Vt[rank:].T
        else:
            Z = np.eye(n)
        ray = False
        d = np.zeros(n)
        gr = Z.T @ g
        if Z.shape[1] and np.linalg.norm(gr) > 1e-13 * max(1.0, np.linalg.norm(g)):
            Hr = Z.T @ Q @ Z
            w, V = np.linalg.eigh(Hr)
            flat = w <= 1e-12 * max(1.0, float(np.abs(w).max()))
            null = V[:, flat]
            g_null = null.T @ gr
            if np.linalg.norm(g_null) > 1e-12 * max(1.0, np.linalg.norm(g)):
                # descent along a direction of zero curvature: follow the ray
                d = -(Z @ (null @ g_null))
                ray = True
            else:
                curved = V[:, ~flat]
                d = -(Z @ (curved @ ((curved.T @ gr) / w[~flat])))
        if not ray and (at_min or not np.any(d)):
            at_min = False
            if not W:
                return z, np.zeros(rows), it
            lam_w = np.linalg.lstsq(G[W].T, -g, rcond=None)[0]
            j = int(np.argmin(lam_w))
            if lam_w[j] >= -1e-11 * max(1.0, float(np.abs(lam_w).max())):
                lam = np.zeros(rows)
                lam[W] = np.maximum(lam_w, 0.0)
                return z, lam, it
            W.pop(j)
            continue
        Gd = G @ d
        slack = np.maximum(h - G @ z, 0.0)
        step = np.inf if ray else 1.0
        block = -1
        cand = Gd > 1e-14 * np.maximum(row_norm, 1.0) * np.linalg.norm(d)
        cand[W] = False
        if np.any(cand):
            idx = np.flatnonzero(cand)
            ratios = slack[idx] / Gd[idx]
            k = int(np.argmin(ratios))  # argmin takes the lowest index among ties
            if ratios[k] < step:
                step, block = float(ratios[k]), int(idx[k])
        if not np.isfinite(step):
            raise UnboundedProblem("objective is unbounded along a zero-curvature ray")
        z = z + step * d
        if block >= 0:
            W.append(block)
        else:
            at_min = True
    return None


def solve_qp(p: QpProblem, active_hint=None, start=None) -> QpSolution:
    """Maximise q.z - 1/2 z'Qz over G z <= h; multipliers are returned in row order."""
    if not (np.all(np.isfinite(p.Q)) and np.all(np.isfinite(p.q)) and np.all(np.isfinite(p.G))):
        raise DimensionError("non-finite QP data")
    _check_unbounded(p)
    if active_hint is not None:
        hit = _try_active(p, active_hint)
        if hit is not None:
            z, lam = hit
            return QpSolution(z, p.objective(z), lam, 0, True)
    out = _primal_active_set(p, _feasible_start(p, start), () if active_hint is None else active_hint)
    if out is not None:
        z, lam, it = out
        act = np.flatnonzero(lam > 0)
        hit = _try_active(p, act)
        if hit is not None:
            z, lam = hit
            return QpSolution(z, p.objective(z), lam, it, True)
        if _accept(p, z, lam, KKT_TOL):
            return QpSolution(z, p.objective(z), lam, it, False)
    z, lam, it = _ipm(p)
    slack = p.h - p.G @ z
    active = np.flatnonzero(lam > slack)
    hit = _try_active(p, active)
    if hit is not None:
        zp, lp = hit
        if p.objective(zp) >= p.objective(z) - 1e-9 * (1.0 + abs(p.objective(z))):
            return QpSolution(zp, p.objective(zp), lp, it, True)
    return QpSolution(z, p.objective(z), lam, it, False)
