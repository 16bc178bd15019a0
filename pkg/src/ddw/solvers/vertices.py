"""Brute-force vertex enumeration for tiny LPs (test oracle)."""

from __future__ import annotations

import itertools

import numpy as np

from ddw.errors import DdwError
from ddw.solvers.lp import LpProblem

MAX_VARS = 12


def _constraint_rows(p: LpProblem):
    """All constraints as (a, beta) meaning a.x <= beta, plus the equalities."""
    n = p.n
    rows, rhs = [p.G], [p.h]
    eye = np.eye(n)
    fin_lo = np.isfinite(p.lower)
    fin_up = np.isfinite(p.upper)
    rows.append(-eye[fin_lo])
    rhs.append(-p.lower[fin_lo])
    rows.append(eye[fin_up])
    rhs.append(p.upper[fin_up])
    return np.vstack(rows), np.concatenate(rhs)


def enumerate_vertices(p: LpProblem, tol: float = 1e-9) -> list[np.ndarray]:
    """Every basic feasible point of ``p`` (at most 12 variables)."""
    n = p.n
    if n > MAX_VARS:
        raise DdwError(f"vertex enumeration is capped at {MAX_VARS} variables, got {n}")
    A_in, b_in = _constraint_rows(p)
    me = p.E.shape[0]
    need = n - me
    if need < 0:
        need = 0
    found: dict[bytes, np.ndarray] = {}
    for subset in itertools.combinations(range(A_in.shape[0]), need):
        K = np.vstack([p.E, A_in[list(subset)]])
        r = np.concatenate([p.f, b_in[list(subset)]])
        if K.shape[0] != n or abs(np.linalg.det(K)) < 1e-12:
            if K.shape[0] < n or np.linalg.matrix_rank(K) < n:
                continue
        try:
            x = np.linalg.solve(K, r) if K.shape[0] == n else np.linalg.lstsq(K, r, rcond=None)[0]
        except np.linalg.LinAlgError:
            continue
        scale = 1.0 + np.abs(x).max()
        if A_in.size and np.any(A_in @ x > b_in + tol * scale):
            continue
        if me and np.any(np.abs(p.E @ x - p.f) > tol * scale):
            continue
        key = (np.round(x, 9) + 0.0).tobytes()
        found.setdefault(key, x)
    return list(found.values())
