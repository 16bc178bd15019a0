"""Acceptance gate: one PASS/FAIL line per criterion, each at its stated tolerance."""

from __future__ import annotations

import os
import time

import numpy as np
import pytest

from ddw.admm import DualBox, build_worker_qp
from ddw.bench.baselines import solve_direct
from ddw.bench.suites import load_seeds, run_case, run_scaling
from ddw.driver import DdwConfig, certify_bounds, run_ddw
from ddw.instgen import BOX_UPPER, GenSpec, IntStream, generate, generate_feasible
from ddw.model import BlockAngularInstance, Column, ColumnPool, Sense, dumps_instance
from ddw.solvers import QpProblem, Status, enumerate_vertices, kkt_residuals, solve_lp, solve_qp

from conftest import box_block, brute_force_qp, check_lp_kkt, random_lp, random_pd

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    def say(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
        assert ok, detail

    return say


@pytest.fixture(scope="module")
def grid():
    t0 = time.perf_counter()
    results = [run_case(case) for case in load_seeds()]
    return results, time.perf_counter() - t0


def _row(res, mode):
    return next(r for r in res.rows if r.mode == mode)


def _checks(res):
    return {c.name: c for c in res.checks}


def test_criterion_01_grid(grid, verdict):
    results, secs = grid
    gaps = np.array([_row(r, "ddw").gap for r in results])
    viols = np.array([_row(r, "ddw").violation for r in results])
    cells = {(r.rows[0].N, r.rows[0].m) for r in results}
    ok = (
        len(results) == 48
        and len(cells) == 16
        and gaps.max() <= 2.5e-2
        and np.mean(gaps <= 1e-2) >= 0.9
        and viols.max() <= 1e-3
        and secs <= 600
    )
    verdict(
        1,
        ok,
        f"{len(results)} runs, max gap {gaps.max():.3e}, share <= 1e-2 {np.mean(gaps <= 1e-2):.3f}, "
        f"max violation {viols.max():.3e}, suite time {secs:.1f}s",
    )


def _equality_variants(count=4):
    out = []
    for N, m in [(2, 1), (4, 2), (5, 1), (2, 2)][:count]:
        for seed in range(1, 100):
            raw = generate(GenSpec.from_total(seed, N, 100, m))
            inst = BlockAngularInstance(raw.t, [Sense.EQ] * m, raw.blocks, raw.metadata)
            direct = solve_direct(inst)
            if direct.status is Status.OPTIMAL:
                out.append((inst, direct.objective))
                break
    return out


def test_criterion_02_linking_violation_budget(grid, verdict):
    results, _ = grid
    worst = -np.inf
    records = 0
    for res in results:
        for name in ("feasibility_eq", "feasibility_ge"):
            c = _checks(res)[name]
            worst = max(worst, c.measured - c.budget)
            records += 1
    eq_worst = -np.inf
    for inst, z_star in _equality_variants():
        rep = run_ddw(inst)
        c = {c.name: c for c in certify_bounds(inst, rep, z_star)}["feasibility_eq"]
        eq_worst = max(eq_worst, c.measured - c.budget)
        worst = max(worst, c.measured - c.budget)
        records += 1
    verdict(2, worst <= 0 and np.isfinite(eq_worst),
            f"{records} records, worst measured - (N eps_p + 1e-5) = {worst:.3e} (equality-row runs: {eq_worst:.3e})")


def test_criterion_03_optimality_budget(grid, verdict):
    results, _ = grid
    slack = [_checks(r)["optimality"].slack for r in results]
    verdict(3, min(slack) >= 0, f"z_hat - z* within gamma (eps_d + 1) + m M N eps_p on {len(slack)} runs, min slack {min(slack):.3e}")


def test_criterion_04_multiplier_sum(verdict):
    worst, iters = 0.0, 0

    def watch(outer, st):
        nonlocal worst, iters
        A = np.vstack(st.alpha_n)
        ratio = np.abs(A.sum(axis=0)).max() / (1.0 + np.abs(A).max())
        worst = max(worst, float(ratio))
        iters += 1

    for case in load_seeds()[::10][:5]:
        inst, _ = generate_feasible(GenSpec.from_total(case.seed, case.N, case.vars, case.m))
        run_ddw(inst, observer=watch)
    verdict(4, worst <= 1e-9, f"max ||sum alpha||_inf / (1 + max ||alpha_n||_inf) = {worst:.3e} over {iters} iterations of 5 runs")


def test_criterion_05_pooled_reduced_costs(grid, verdict):
    results, _ = grid
    worst = max(_checks(r)["reduced_costs"].measured for r in results)
    verdict(5, worst <= 1e-6, f"min pooled (reduced cost + ||A^i|| eps_d) = {-worst:.3e} >= -1e-6 on {len(results)} runs")


def test_criterion_06_sandwich(verdict):
    worst, records = -np.inf, 0
    for case in load_seeds()[::5][:10]:
        inst, _ = generate_feasible(GenSpec.from_total(case.seed, case.N, case.vars, case.m))
        z_dm = solve_direct(inst).objective
        rep = run_ddw(inst, DdwConfig(certify=True))
        for c in certify_bounds(inst, rep, z_dm):
            if c.name.startswith("sandwich"):
                worst = max(worst, c.measured - c.budget)
                records += 1
    verdict(6, records > 0 and worst <= 0,
            f"z_hat_RDM + sum min(0, z_sep) <= z*_DM <= z*_RDM + 1e-6 on {records} outer iterations, worst excess {worst:.3e}")


def _worker_qp(rng):
    m = int(rng.integers(1, 3))
    blk = box_block(rng.uniform(1, 10, size=2), rng.normal(size=(m, 2)) * 3, upper=5.0)
    pool = ColumnPool(0)
    for x in rng.uniform(0, 5, size=(int(rng.integers(1, 4)), 2)):
        pool.add(Column.from_point(0, blk, x))
    box = DualBox(np.zeros(m), np.full(m, 20.0))
    qp = build_worker_qp(pool, rng.normal(size=m), rng.uniform(0, 1, size=m), rng.normal(size=m) * 0.1, 3.0, box)
    return qp


def test_criterion_07_solver_oracles(rng, verdict):
    lp_worst, lps = 0.0, 0
    while lps < 200:
        p = random_lp(rng, n=4, mi=4, me=int(rng.integers(0, 2)), sense=("min", "max")[lps % 2])
        verts = enumerate_vertices(p)
        if not verts:
            continue
        vals = [p.c @ v for v in verts]
        best = min(vals) if p.sense == "min" else max(vals)
        sol = solve_lp(p)
        lp_worst = max(lp_worst, abs(sol.objective - best) / max(1.0, abs(best)))
        check_lp_kkt(p, sol)
        lps += 1
    qp_worst, kkt_worst = 0.0, 0.0
    for i in range(100):
        if i % 2:
            n = int(rng.integers(2, 4))
            G = np.vstack([rng.normal(size=(3, n)), np.eye(n), -np.eye(n)])
            h = np.concatenate([rng.uniform(0.1, 2.0, size=3), np.full(2 * n, 3.0)])
            qp = QpProblem(rng.normal(size=n) * 5, random_pd(rng, n), G, h)
        else:
            qp = _worker_qp(rng)
        best, _, _ = brute_force_qp(qp.q, qp.Q, qp.G, qp.h)
        sol = solve_qp(qp)
        qp_worst = max(qp_worst, abs(sol.objective - best) / max(1.0, abs(best)))
        kkt_worst = max(kkt_worst, *kkt_residuals(qp, sol.z, sol.multipliers))
    ok = lp_worst <= 1e-9 and qp_worst <= 1e-8 and kkt_worst <= 1e-8
    verdict(7, ok, f"200 LPs worst rel error {lp_worst:.1e} (KKT checked); 100 QPs worst {qp_worst:.1e}, KKT residual {kkt_worst:.1e}")


def test_criterion_08_classical_matches_direct(grid, verdict):
    results, _ = grid
    worst = max(_row(r, "classical").gap for r in results)
    verdict(8, worst <= 1e-6, f"classical DW vs direct, worst relative difference {worst:.3e} on {len(results)} instances")


def test_criterion_09_transports_and_determinism(verdict):
    diff, bitwise = 0.0, True
    for case in load_seeds()[1::16]:
        inst, _ = generate_feasible(GenSpec.from_total(case.seed, case.N, case.vars, case.m))
        a = run_ddw(inst)
        b = run_ddw(inst, transport="tcp", hosts=2)
        c = run_ddw(inst)
        diff = max(diff, abs(a.z_hat - b.z_hat), *(np.abs(x - y).max() for x, y in zip(a.x_hat, b.x_hat)))
        bitwise &= a.z_hat == c.z_hat and a.pi.tobytes() == c.pi.tobytes()
        bitwise &= all(x.tobytes() == y.tobytes() for x, y in zip(a.x_hat, c.x_hat))
    verdict(9, diff <= 1e-9 and bitwise, f"in-process vs TCP max difference {diff:.1e}; repeated in-process runs bitwise equal: {bitwise}")


def test_criterion_10_generator_conformance(verdict):
    problems = []
    spec = GenSpec(5, 10, 40, 10)
    inst = generate(spec)
    for blk in inst.blocks:
        if blk.A.min() < -10 or blk.A.max() > 20 or blk.B.min() < -10 or blk.B.max() > 20:
            problems.append("A/B range")
        if blk.c.min() < -10 or blk.c.max() > 30:
            problems.append("c range")
        if blk.B.shape != (40, 40):
            problems.append("B not square")
        if not (np.all(blk.lower == 0) and np.all(blk.upper == 30) and BOX_UPPER == 30):
            problems.append("box")
        for ell, rhs in zip(blk.B.sum(axis=1), blk.b):
            if not min(2 * ell, 3 * ell) <= rhs <= max(2 * ell, 3 * ell):
                problems.append("b rule")
    for ell, rhs in zip(sum(b.A.sum(axis=1) for b in inst.blocks), inst.t):
        if not min(2 * ell, 3 * ell) <= rhs <= max(2 * ell, 3 * ell):
            problems.append("t rule")
    from ddw.instgen import _rhs_from_row_sums

    cases = _rhs_from_row_sums(IntStream(0), np.array([0, 10, -10] * 100))
    if not (np.all(cases[0::3] == 0) and cases[1::3].min() >= 20 and cases[1::3].max() <= 30 and cases[2::3].max() <= -20):
        problems.append("t cases")
    if dumps_instance(generate(spec)) != dumps_instance(inst):
        problems.append("bytes differ")
    AB = np.concatenate([b.A.ravel() for b in inst.blocks] + [b.B.ravel() for b in inst.blocks])
    c = np.concatenate([b.c for s in range(10) for b in generate(GenSpec(s, 10, 100, 1)).blocks])
    if abs(AB.mean() - 5) > 0.5 or abs(c.mean() - 10) > 0.5:
        problems.append("means")
    verdict(10, not problems, f"A/B mean {AB.mean():.3f}, c mean {c.mean():.3f}; problems: {sorted(set(problems)) or 'none'}")


@pytest.mark.xfail(os.cpu_count() is not None and os.cpu_count() < 4, reason="fewer than 4 CPUs: worker processes share cores", strict=False)
def test_criterion_11_scaling(tmp_path, verdict):
    rows, utils = run_scaling(tmp_path, N=8, total_vars=2000, m=5, seed=1, host_counts=(1, 4), log=lambda s: None)
    spd = rows[-1].speedup
    flat = [u for us in utils.values() for u in us]
    ok = spd > 1 and all(0 < u <= 1 for u in flat)
    verdict(11, ok, f"speedup p=4 {spd:.3f} (t1 {rows[0].time_s:.1f}s, t4 {rows[1].time_s:.1f}s), "
            f"utilization in [{min(flat):.3f}, {max(flat):.3f}] on {os.cpu_count()} CPU(s)")
