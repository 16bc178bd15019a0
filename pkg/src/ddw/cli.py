"""Command line: ddw gen | solve | bench | worker."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from ddw.admm import AdmmConfig
from ddw.driver import DdwConfig, ToleranceSchedule


def _ints(text: str) -> list:
    return [int(s) for s in text.split(",") if s.strip()]


def _config(args) -> DdwConfig:
    sched = ToleranceSchedule()
    kw = {}
    if args.eps_p is not None:
        kw["eps_p"] = args.eps_p
    if args.eps_d is not None:
        kw["eps_d"] = args.eps_d
    if kw:
        sched = ToleranceSchedule(**{**sched.__dict__, **kw})
        # a target looser than the starting tolerance starts there directly
        sched = ToleranceSchedule(
            max(sched.eps_p0, sched.eps_p), max(sched.eps_d0, sched.eps_d), sched.factor, sched.eps_p, sched.eps_d
        )
    return DdwConfig(admm=AdmmConfig(guard=args.guard), schedule=sched)


def cmd_gen(args) -> int:
    from ddw.instgen import GenSpec, generate, generate_feasible
    from ddw.model import save_instance

    spec = GenSpec.from_total(args.seed, args.blocks, args.vars, args.links)
    if args.ensure_feasible:
        inst, used = generate_feasible(spec, args.max_redraws)
        if used != args.seed:
            print(f"seed {args.seed} gave an infeasible draw; using seed {used}", file=sys.stderr)
    else:
        inst = generate(spec)
    save_instance(inst, args.out)
    return 0


def cmd_solve(args) -> int:
    from ddw.bench.baselines import solve_classical_dwd, solve_direct, split_blocks
    from ddw.bench.metrics import RunMetrics, mean_utilization, optimality_gap, rel_feas_violation
    from ddw.bench.report import report_to_dict, write_csv, write_json
    from ddw.driver import certify_bounds, run_ddw
    from ddw.model import evaluate_primal, load_instance, validate
    from ddw.runtime.coordinator import open_cluster
    from ddw.solvers import Status

    inst = load_instance(args.instance)
    defects = validate(inst)
    if defects:
        print("invalid instance: " + "; ".join(defects), file=sys.stderr)
        return 2
    z_star = None
    if args.mode == "direct" or not args.no_oracle:
        t0 = time.perf_counter()
        direct = solve_direct(inst)
        t_direct = time.perf_counter() - t0
        if direct.status is not Status.OPTIMAL:
            print(f"direct solve: {direct.status.value}", file=sys.stderr)
            return 3
        z_star = direct.objective
    detail = None
    outer = admm = 0
    util = float("nan")
    if args.mode == "direct":
        x_hat, secs = split_blocks(inst, direct.x), t_direct
    elif args.mode == "classical":
        t0 = time.perf_counter()
        cl = solve_classical_dwd(inst)
        x_hat, secs, outer = cl.x_hat, time.perf_counter() - t0, cl.iterations
    else:
        cluster = open_cluster(inst, args.transport, args.hosts, args.workers)
        try:
            rep = run_ddw(inst, _config(args), cluster=cluster)
        finally:
            cluster.close()
        rep.checks = certify_bounds(inst, rep, z_star)
        x_hat, secs, outer, admm = rep.x_hat, rep.timings["total"], rep.outer_iters, rep.admm_iters
        util = mean_utilization(rep.hosts)
        detail = {"z_star": z_star, "report": report_to_dict(rep)}
        if rep.status != "optimal":
            print(f"ddw finished with status {rep.status}", file=sys.stderr)
    z, residual = evaluate_primal(inst, x_hat)
    gap = optimality_gap(z, z_star)[0] if z_star is not None else float("nan")
    name = Path(args.instance).stem
    row = RunMetrics(
        name, inst.num_blocks, inst.num_links, inst.num_vars, args.mode, z, gap,
        rel_feas_violation(inst, residual)[0], outer, admm, secs, float("nan"), util,
    )
    if args.report:
        write_csv(args.report, [row])
        if detail is not None:
            write_json(Path(args.report).with_suffix(".json"), detail)
    print(f"{args.mode}: z={z!r} gap={gap:.3e} violation={row.violation:.3e} time={secs:.3f}s")
    return 0


def cmd_bench(args) -> int:
    from ddw.bench import suites

    if args.suite == "table1":
        cases = suites.load_seeds(args.seeds)
        suites.run_table1(cases, args.out, _config(args), args.transport, args.hosts)
    else:
        suites.run_scaling(
            args.out, args.blocks, args.vars, args.links, args.seed, _ints(args.host_counts), args.transport, _config(args)
        )
    return 0


def cmd_worker(args) -> int:
    from ddw.model import load_instance
    from ddw.runtime.transport import parse_address
    from ddw.runtime.worker import listen_and_serve

    inst = load_instance(args.instance)
    blocks = _ints(args.blocks) if args.blocks else list(range(inst.num_blocks))
    host, port = parse_address(args.listen)
    listen_and_serve(inst, blocks, host, port, args.host_id)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ddw", description="Distributed Dantzig-Wolfe for block-angular LPs")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a random instance as JSON")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--blocks", type=int, required=True)
    g.add_argument("--vars", type=int, required=True, help="total variables, split evenly over blocks")
    g.add_argument("--links", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--ensure-feasible", action="store_true", help="redraw with seed+1, ... until the LP is feasible")
    g.add_argument("--max-redraws", type=int, default=20)
    g.set_defaults(func=cmd_gen)

    def tolerances(sp):
        sp.add_argument("--eps-p", type=float, default=None, help="target primal residual tolerance")
        sp.add_argument("--eps-d", type=float, default=None, help="target dual residual tolerance")
        sp.add_argument("--guard", choices=("both", "either"), default="both", help="ADMM stopping rule")
        sp.add_argument("--transport", choices=("local", "tcp"), default="local")
        sp.add_argument("--hosts", type=int, default=1, help="worker hosts to start")

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--mode", choices=("ddw", "classical", "direct"), default="ddw")
    tolerances(s)
    s.add_argument("--workers", default=None, help="host:port,... of running workers (or DDW_WORKERS)")
    s.add_argument("--report", default=None, help="CSV row; a JSON detail file is written next to it")
    s.add_argument("--no-oracle", action="store_true", help="skip the direct solve used for the gap")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a benchmark suite")
    b.add_argument("--suite", choices=("table1", "scaling"), default="table1")
    b.add_argument("--seeds", default=None, help="CSV N,m,vars,seed (default: the packaged grid)")
    b.add_argument("--out", required=True)
    tolerances(b)
    b.add_argument("--blocks", type=int, default=8, help="scaling suite: blocks")
    b.add_argument("--vars", type=int, default=2000, help="scaling suite: total variables")
    b.add_argument("--links", type=int, default=5, help="scaling suite: linking rows")
    b.add_argument("--seed", type=int, default=1, help="scaling suite: instance seed")
    b.add_argument("--host-counts", default="1,2,4,8", help="scaling suite: comma-separated host counts")
    b.set_defaults(func=cmd_bench)

    w = sub.add_parser("worker", help="serve blocks to one coordinator over TCP")
    w.add_argument("--instance", required=True)
    w.add_argument("--blocks", default=None, help="comma-separated block ids (default: all)")
    w.add_argument("--listen", default="127.0.0.1:0", help="host:port; port 0 picks a free one")
    w.add_argument("--host-id", type=int, default=0)
    w.set_defaults(func=cmd_worker)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "bench" and args.suite == "scaling" and args.transport == "local":
        print("note: in-process hosts share one interpreter; use --transport tcp for real parallelism", file=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
