import json
import subprocess
import sys

import pytest

from fmeca_amas import sample_path
from fmeca_amas.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main

SAMPLE = str(sample_path())


def test_validate_ok(capsys):
    assert main(["validate", SAMPLE]) == EXIT_OK
    assert "0 error(s)" in capsys.readouterr().out


def test_validate_bad_model(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": "1.0", "budget": 1, "failure_modes": [], "actions": [], "zzz": 1}')
    assert main(["validate", str(bad)]) == EXIT_FAIL
    assert "unknown-key" in capsys.readouterr().err
    assert main(["validate", str(bad), "--lenient"]) == EXIT_OK


def test_usage_errors(tmp_path):
    assert main(["validate", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert main(["solve"]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["solve", SAMPLE, "--budget-override", "abc"]) == EXIT_USAGE
    assert main(["gen"]) == EXIT_USAGE


def test_solve_writes_report_and_trace(tmp_path):
    out, trace = tmp_path / "r.json", tmp_path / "t.jsonl"
    assert main(["solve", SAMPLE, "--out", str(out), "--trace-out", str(trace)]) == EXIT_OK
    assert json.loads(out.read_bytes())["verdict"] == "FEASIBLE"
    lines = trace.read_text().splitlines()
    assert json.loads(lines[0])["event"] == "start" and json.loads(lines[-1])["event"] == "end"


def test_solve_budget_infeasible_exits_nonzero(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["solve", SAMPLE, "--budget-override", "0", "--max-rounds", "50", "--out", str(out)]) == EXIT_FAIL
    assert "budget-infeasible" in capsys.readouterr().err
    assert json.loads(out.read_bytes())["verdict"] == "BUDGET-INFEASIBLE"


def test_solve_is_byte_identical(tmp_path):
    outs = []
    for k in range(3):
        out = tmp_path / f"r{k}.json"
        main(["solve", SAMPLE, "--seed", "3", "--out", str(out)])
        outs.append(out.read_bytes())
    assert len(set(outs)) == 1


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FMECA_AMAS_OUTPUT_DIR", str(tmp_path))
    assert main(["solve", SAMPLE, "--format", "table"]) == EXIT_OK
    assert (tmp_path / "generator_sample.solve.txt").exists()


def test_oracle_compare_report_pipeline(tmp_path, capsys):
    report, oracle, gap = tmp_path / "r.json", tmp_path / "o.json", tmp_path / "g.txt"
    assert main(["solve", SAMPLE, "--out", str(report)]) == EXIT_OK
    assert main(["oracle", SAMPLE, "--out", str(oracle)]) == EXIT_OK
    assert main(["compare", str(report), str(oracle), "--out", str(gap)]) == EXIT_OK
    assert gap.read_text().startswith("OPTIMAL")
    assert main(["report", str(report), SAMPLE, "--out", str(tmp_path / "r.txt")]) == EXIT_OK
    assert "FEASIBLE" in (tmp_path / "r.txt").read_text()

    other = tmp_path / "o2.json"
    assert main(["oracle", SAMPLE, "--budget-override", "30", "--out", str(other)]) == EXIT_OK
    assert main(["compare", str(report), str(other)]) == EXIT_FAIL
    assert "digest mismatch" in capsys.readouterr().err


def test_oracle_limit(tmp_path):
    model = tmp_path / "m.json"
    assert main(["gen", "3", "8", "--out", str(model)]) == EXIT_OK
    assert main(["oracle", str(model), "--limit", "4"]) == EXIT_FAIL


@pytest.mark.parametrize("fmt, ext", [("structured", "json"), ("tabular", "csv")])
def test_gen_is_deterministic_and_feasible(tmp_path, fmt, ext):
    a, b = tmp_path / f"a.{ext}", tmp_path / f"b.{ext}"
    for path in (a, b):
        assert main(["gen", "--failure-modes", "4", "--actions", "7", "--seed", "9", "--feasible",
                     "--model-format", fmt, "--out", str(path)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    oracle = tmp_path / "o.json"
    assert main(["oracle", str(a), "--out", str(oracle)]) == EXIT_OK
    assert json.loads(oracle.read_bytes())["feasible_exists"] is True


def test_stdin_and_module_entry_point():
    data = sample_path().read_bytes()
    proc = subprocess.run([sys.executable, "-m", "fmeca_amas.cli", "solve", "-", "--format", "table"],
                          input=data, capture_output=True)
    assert proc.returncode == 0, proc.stderr
    assert b"FEASIBLE" in proc.stdout
