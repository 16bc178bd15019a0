"""Benchmark suites: the desk-scale grid and a host-count scaling sweep."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ddw.bench.baselines import solve_classical_dwd, solve_direct, split_blocks
from ddw.bench.metrics import RunMetrics, mean_utilization, optimality_gap, rel_feas_violation, speedup, utilization
from ddw.bench.report import report_to_dict, write_csv, write_json
from ddw.driver import DdwConfig, certify_bounds, run_ddw
from ddw.errors import DdwError, NumericalFailure
from ddw.instgen import GenSpec, generate_feasible
from ddw.model import evaluate_primal
from ddw.solvers import Status

MODES = ("direct", "classical", "ddw")


@dataclass(frozen=True)
class SuiteCase:
    N: int
    m: int
    vars: int
    seed: int


def load_seeds(path=None) -> list:
    """Rows ``N,m,vars,seed`` (header required); the packaged grid when ``path`` is None."""
    if path is None:
        text = resources.files("ddw.bench").joinpath("data/table1_seeds.csv").read_text()
    else:
        text = Path(path).read_text()
    reader = csv.DictReader(line for line in text.splitlines() if line.strip() and not line.startswith("#"))
    if reader.fieldnames is None or set(reader.fieldnames) != {"N", "m", "vars", "seed"}:
        raise ValueError("seeds file needs the header N,m,vars,seed")
    return [SuiteCase(int(r["N"]), int(r["m"]), int(r["vars"]), int(r["seed"])) for r in reader]


def case_name(N, m, total, seed) -> str:
    return f"N{N}_m{m}_v{total}_s{seed}"


@dataclass
class CaseResult:
    name: str
    rows: list
    z_star: float
    ddw: object = None
    checks: list = None


def run_case(case: SuiteCase, modes=MODES, cfg: DdwConfig | None = None, transport="local", hosts=1) -> CaseResult:
    """Generate (with feasibility redraws), then run each method; gaps are against the direct optimum."""
    inst, seed_used = generate_feasible(GenSpec.from_total(case.seed, case.N, case.vars, case.m))
    name = case_name(case.N, case.m, case.vars, seed_used)
    t0 = time.perf_counter()
    direct = solve_direct(inst)
    t_direct = time.perf_counter() - t0
    if direct.status is not Status.OPTIMAL:
        raise NumericalFailure(f"{name}: direct solve is {direct.status.value}")
    z_star = direct.objective
    rows, ddw_report, checks = [], None, None

    def row(mode, x_hat, outer, admm, secs, util=float("nan"), spd=float("nan")):
        z, residual = evaluate_primal(inst, x_hat)
        return RunMetrics(
            name, case.N, case.m, case.vars, mode, z, optimality_gap(z, z_star)[0],
            rel_feas_violation(inst, residual)[0], outer, admm, secs, spd, util,
        )

    if "direct" in modes:
        rows.append(row("direct", split_blocks(inst, direct.x), 0, 0, t_direct))
    if "classical" in modes:
        t0 = time.perf_counter()
        cl = solve_classical_dwd(inst)
        rows.append(row("classical", cl.x_hat, cl.iterations, 0, time.perf_counter() - t0))
    if "ddw" in modes:
        rep = run_ddw(inst, cfg, transport=transport, hosts=hosts)
        ddw_report = rep
        checks = certify_bounds(inst, rep, z_star)
        rep.checks = checks
        rows.append(
            row("ddw", rep.x_hat, rep.outer_iters, rep.admm_iters, rep.timings["total"], mean_utilization(rep.hosts))
        )
    return CaseResult(name, rows, z_star, ddw_report, checks)


def run_table1(cases, out_dir, cfg=None, transport="local", hosts=1, modes=MODES, log=print) -> list:
    """Every case through every method; writes results.csv, per-run JSON and gaps.png."""
    from ddw.bench import plots

    out = Path(out_dir)
    rows = []
    for case in cases:
        res = run_case(case, modes, cfg, transport, hosts)
        rows.extend(res.rows)
        if res.ddw is not None:
            write_json(out / "details" / f"{res.name}.json", {"z_star": res.z_star, "report": report_to_dict(res.ddw)})
        for r in res.rows:
            log(f"{r.instance:>20} {r.mode:>9}  z={r.z:.6g}  gap={r.gap:.2e}  viol={r.violation:.2e}  t={r.time_s:.2f}s")
    write_csv(out / "results.csv", rows)
    if any(r.mode == "ddw" for r in rows):
        plots.gap_grid(rows, out / "gaps.png")
    return rows


def run_scaling(out_dir, N=8, total_vars=2000, m=5, seed=1, host_counts=(1, 2, 4, 8), transport="tcp", cfg=None, log=print):
    """DDW on one instance with 1..p hosts; writes speedup.csv, utilization.csv and their figures.

    Gaps are measured against classical Dantzig-Wolfe rather than the direct LP.
    """
    from ddw.bench import plots

    out = Path(out_dir)
    ref = {}

    def classical_ok(inst):
        # the monolithic simplex is slow at this size; classical DW doubles as
        # feasibility check and reference optimum
        try:
            ref["z"] = solve_classical_dwd(inst).z
        except DdwError:
            return False
        return True

    inst, seed_used = generate_feasible(GenSpec.from_total(seed, N, total_vars, m), check=classical_ok)
    name = case_name(N, m, total_vars, seed_used)
    z_star = ref["z"]
    host_counts = [p for p in host_counts if p <= N]
    times, utils, rows = {}, {}, []
    for p in host_counts:
        rep = run_ddw(inst, cfg, transport=transport, hosts=p)
        times[p] = rep.timings["total"]
        utils[p] = [utilization(h["t_u"], h["t_c"], h["t_s"]) for h in rep.hosts]
        z, residual = evaluate_primal(inst, rep.x_hat)
        rows.append(
            RunMetrics(
                name, N, m, total_vars, f"ddw-p{p}", z, optimality_gap(z, z_star)[0],
                rel_feas_violation(inst, residual)[0], rep.outer_iters, rep.admm_iters, times[p],
                speedup(times[host_counts[0]], times[p]), float(np.mean(utils[p])),
            )
        )
        log(f"p={p}  t={times[p]:.2f}s  speedup={rows[-1].speedup:.3f}  utilization={np.round(utils[p], 3).tolist()}")
    write_csv(out / "scaling.csv", rows)
    with (out / "speedup.csv").open("w") as fh:
        fh.write("hosts,time_s,speedup\n")
        for r, p in zip(rows, host_counts):
            fh.write(f"{p},{r.time_s!r},{r.speedup!r}\n")
    with (out / "utilization.csv").open("w") as fh:
        fh.write("hosts,host,utilization\n")
        for p in host_counts:
            for h, u in enumerate(utils[p]):
                fh.write(f"{p},{h},{u!r}\n")
    plots.speedup_curve(host_counts, [r.speedup for r in rows], out / "speedup.png")
    plots.utilization_bars(host_counts, [utils[p] for p in host_counts], out / "utilization.png")
    return rows, utils
