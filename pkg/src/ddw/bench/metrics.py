"""Solution-quality and parallel-efficiency metrics, and the CSV row format."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ddw.model import BlockAngularInstance, Sense

CSV_FIELDS = [
    "instance", "N", "m", "vars", "mode", "z", "gap", "violation",
    "outer_iters", "admm_iters", "time_s", "speedup", "mean_utilization",
]


def optimality_gap(z_hat: float, z_star: float) -> tuple[float, bool]:
    """(|z_hat - z*| / |z*|, absolute); falls back to the absolute gap when z* = 0."""
    diff = abs(z_hat - z_star)
    if z_star == 0.0:
        return diff, True
    return diff / abs(z_star), False


def rel_feas_violation(instance: BlockAngularInstance, residual) -> tuple[float, bool]:
    """Violation of the worst linking row relative to its right-hand side.

    ``residual`` is sum_n A_n x_n - t. For a >= row the violation is the
    shortfall max(t_i - (Ax)_i, 0); for an equality row it is |residual|.
    The worst row is reported as violation / |t_i|, or as an absolute value
    (second element True) when t_i = 0.
    """
    r = np.asarray(residual, dtype=float)
    ge = np.array([s is Sense.GE for s in instance.senses])
    viol = np.where(ge, np.maximum(-r, 0.0), np.abs(r))
    i = int(np.argmax(viol))
    ti = float(instance.t[i])
    if ti == 0.0:
        return float(viol[i]), True
    return float(viol[i]) / abs(ti), False


def speedup(t_serial: float, t_parallel: float) -> float:
    if not t_parallel > 0:
        raise ValueError("parallel time must be positive")
    return t_serial / t_parallel


def utilization(t_u: float, t_c: float, t_s: float) -> float:
    """Busy share T_u / (T_u + T_c + T_s) of one host."""
    total = t_u + t_c + t_s
    if not total > 0:
        raise ValueError("host recorded no time")
    return t_u / total


def mean_utilization(hosts: list) -> float:
    return float(np.mean([utilization(h["t_u"], h["t_c"], h["t_s"]) for h in hosts]))


@dataclass
class RunMetrics:
    instance: str
    N: int
    m: int
    vars: int
    mode: str
    z: float
    gap: float
    violation: float
    outer_iters: int
    admm_iters: int
    time_s: float
    speedup: float = math.nan
    mean_utilization: float = math.nan

    def row(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(RunMetrics)}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)  # shortest round-trip
    return str(v)


def to_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        d = r.row() if isinstance(r, RunMetrics) else r
        w.writerow([_fmt(d[k]) for k in CSV_FIELDS])
    return buf.getvalue()


def from_csv(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_FIELDS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for d in reader:
        kw = {}
        for k, v in d.items():
            typ = _TYPES[k]
            kw[k] = int(v) if typ in ("int", int) else float(v) if typ in ("float", float) else v
        out.append(RunMetrics(**kw))
    return out
