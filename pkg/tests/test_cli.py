import csv
import io
import json

import pytest

from ollga.cli import compare_report, main, resolve_policy
from ollga.core import static_policy, theory_policy


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_exact(capsys, tmp_path):
    code, out, _ = run(capsys, "exact", "--n", "500", "--policy", "theory", "--csv",
                       "--out", str(tmp_path))
    doc = json.loads(out)
    assert code == 0
    assert doc["total"] == pytest.approx(3224.89, abs=0.01)
    assert len(doc["T"]) == 501 and doc["T"][-1] == 0.0
    assert float(f"{doc['total']:.10g}") == doc["total"]
    rows = (tmp_path / "runtime.csv").read_text().splitlines()
    assert rows[0] == "fitness,remaining" and len(rows) == 502


def test_simulate_n1(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--n", "1", "--lambda", "1", "--seeds", "100",
                       "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "runs.csv").read_text())))
    assert len(rows) == 100 and {r["evaluations"] for r in rows} <= {"1", "2"}
    summary = json.loads(out)
    assert summary["count"] == 100 and "note" in summary


def test_simulate_capped_exit(capsys):
    code, _, _ = run(capsys, "simulate", "--n", "50", "--seeds", "3", "--max-evaluations", "5")
    assert code == 5


def test_reproducible_outputs(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        run(capsys, "simulate", "--n", "20", "--seeds", "50", "--seed", "3", "--out", str(d))
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["outputs"] == mb["outputs"] and ma["config"] == mb["config"]
    assert ma["seed"] == 3 and ma["subcommand"] == "simulate"


def test_config_precedence(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seeds": 7, "policy": "2.0"}))
    _, out, _ = run(capsys, "simulate", "--n", "10", "--config", str(cfg))
    assert json.loads(out)["count"] == 7
    _, out, _ = run(capsys, "simulate", "--n", "10", "--config", str(cfg), "--seeds", "4")
    assert json.loads(out)["count"] == 4
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "simulate", "--n", "10", "--config", str(cfg))
    assert code == 3 and "bogus" in err


def test_usage_and_config_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "exact", "--n", "10", "--wat")[0] == 2
    assert run(capsys, "exact", "--n", "10", "--policy", "no-such-policy")[0] == 3
    assert run(capsys, "exact", "--n", "10", "--policy", "best_binned")[0] == 3
    assert run(capsys, "exact", "--n", "10", "--rounding", "decoupled")[0] == 3


def test_policy_files(tmp_path):
    p = static_policy(12, 2.5)
    (tmp_path / "p.csv").write_text(p.to_csv())
    (tmp_path / "p.json").write_text(json.dumps(p.to_dict()))
    assert resolve_policy(str(tmp_path / "p.csv"), 12) == p
    assert resolve_policy(str(tmp_path / "p.json"), 12) == p
    assert resolve_policy("3", 12) == static_policy(12, 3.0)


def test_compare_report():
    rows, overlay = compare_report(40, {"theory": theory_policy(40), "same": theory_policy(40),
                                        "static": static_policy(40, 2.0)})
    by = {r["policy"]: r for r in rows}
    assert by["theory"]["total"] == by["same"]["total"]
    lines = overlay.strip().splitlines()
    assert lines[0].split(",") == ["fitness", "log_distance", "theory", "same", "static"]
    assert len(lines) == 1 + 40 - 20
    assert all(len(l.split(",")) == 5 for l in lines)


def test_compare_cli_with_file(capsys, tmp_path):
    f = tmp_path / "tuned.json"
    f.write_text(json.dumps(static_policy(60, 4.0).to_dict()))
    code, out, _ = run(capsys, "compare", "--n", "60", "--policies", f"best,theory,{f}",
                       "--out", str(tmp_path / "o"))
    assert code == 0
    totals = {r["policy"]: r["total"] for r in json.loads(out)["policies"]}
    assert totals["best"] <= totals["theory"] and totals["best"] <= totals["tuned"]
    assert (tmp_path / "o" / "overlay.csv").exists()


def test_sweep_cli(capsys, tmp_path):
    pol = tmp_path / "base.json"
    from ollga.core import BinnedPolicy, bin_scheme, dumps_policy
    pol.write_text(dumps_policy(BinnedPolicy(bin_scheme(40, 3), [1, 2.5, 4.5])))
    code, out, _ = run(capsys, "sweep", "--n", "40", "--base", str(pol), "--lo", "2",
                       "--hi", "4", "--step", "0.5")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "lambda,total" and len(lines) == 1 + 5 + 2


def test_tune_and_solve_cli(capsys, tmp_path):
    code, out, _ = run(capsys, "tune", "--n", "30", "--k", "2", "--budget", "100",
                       "--validation-runs", "10", "--out", str(tmp_path / "t"))
    assert code == 0 and json.loads(out)["runs_used"] <= 100
    assert (tmp_path / "t" / "race.csv").read_text().startswith("iteration,candidate")
    code, out, _ = run(capsys, "solve-binned", "--n", "30", "--k", "2", "--popsize", "6",
                       "--iterations", "3", "--restarts", "1")
    assert code == 0 and json.loads(out)["k"] == 2
    code, out, _ = run(capsys, "solve-optimal", "--n", "20", "--out", str(tmp_path / "s"))
    assert code == 0 and (tmp_path / "s" / "decisions.csv").exists()
    code, out, _ = run(capsys, "cascade", "--n", "30", "--k-max", "2", "--budget", "60",
                       "--validation-runs", "10")
    assert code == 0 and [s["k"] for s in json.loads(out)["stages"]] == [1, 2]
