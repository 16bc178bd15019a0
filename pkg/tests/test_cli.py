from __future__ import annotations

import json
import subprocess
import sys

import pytest

from ddw.bench.metrics import from_csv
from ddw.cli import main
from ddw.model import load_instance


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "inst.json"
    assert main(["gen", "--seed", "3", "--blocks", "2", "--vars", "10", "--links", "2", "--out", str(path), "--ensure-feasible"]) == 0
    return path


def test_gen_writes_a_loadable_instance(instance_file):
    inst = load_instance(instance_file)
    assert inst.num_blocks == 2 and inst.num_vars == 10 and inst.num_links == 2


def test_gen_rejects_uneven_split(tmp_path):
    with pytest.raises(ValueError):
        main(["gen", "--seed", "1", "--blocks", "3", "--vars", "10", "--links", "1", "--out", str(tmp_path / "x.json")])


@pytest.mark.parametrize("mode", ["direct", "classical", "ddw"])
def test_solve_modes_write_a_report(instance_file, tmp_path, mode, capsys):
    report = tmp_path / f"{mode}.csv"
    assert main(["solve", "--instance", str(instance_file), "--mode", mode, "--report", str(report)]) == 0
    assert capsys.readouterr().out.startswith(f"{mode}: z=")
    (row,) = from_csv(report.read_text())
    assert row.mode == mode and row.N == 2 and row.vars == 10
    assert row.gap <= (2.5e-2 if mode == "ddw" else 1e-6)
    detail = report.with_suffix(".json")
    assert detail.exists() == (mode == "ddw")
    if mode == "ddw":
        data = json.loads(detail.read_text())
        assert {c["name"] for c in data["report"]["checks"]} >= {"alpha_sum", "optimality"}


def test_solve_over_tcp(instance_file, capsys):
    assert main(["solve", "--instance", str(instance_file), "--transport", "tcp", "--hosts", "2"]) == 0
    assert "ddw: z=" in capsys.readouterr().out


def test_bench_table1_small(tmp_path):
    seeds = tmp_path / "seeds.csv"
    seeds.write_text("N,m,vars,seed\n2,1,10,1\n2,2,10,2\n")
    out = tmp_path / "bench"
    assert main(["bench", "--suite", "table1", "--seeds", str(seeds), "--out", str(out)]) == 0
    rows = from_csv((out / "results.csv").read_text())
    assert len(rows) == 6
    assert (out / "gaps.png").exists()
    assert len(list((out / "details").glob("*.json"))) == 2


def test_module_entry_point_help():
    done = subprocess.run([sys.executable, "-m", "ddw", "--help"], capture_output=True, text=True, timeout=60)
    assert done.returncode == 0
    for cmd in ("gen", "solve", "bench", "worker"):
        assert cmd in done.stdout
