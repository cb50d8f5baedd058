"""Subcommand behavior through the real argv entry point."""

import json

import numpy as np
import pytest

from strideseg.cli import main, run_bench, run_coverage
from strideseg.rwdist import read_table
from strideseg.seqio import read_csv_column


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_writes_series_and_truth(tmp_path, capsys):
    out = tmp_path / "y.f64"
    truth = tmp_path / "truth.json"
    code, stdout, _ = _run(
        capsys,
        "simulate", "--n", "50000", "--j", "3", "--snr", "2.0",
        "--seed", "5", "--out", str(out), "--truth", str(truth),
    )
    assert code == 0
    assert out.stat().st_size == 50000 * 8
    t = json.loads(truth.read_text())
    assert len(t["taus"]) == 3
    assert t["sigma"] == 1.0
    head = json.loads(stdout)
    assert head["j"] == 3 and head["n"] == 50000


def test_simulate_deterministic(tmp_path, capsys):
    a = tmp_path / "a.f64"
    b = tmp_path / "b.f64"
    for p in (a, b):
        code, _, _ = _run(
            capsys, "simulate", "--n", "20000", "--j", "2", "--seed", "9", "--out", str(p)
        )
        assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_csv_output(tmp_path, capsys):
    out = tmp_path / "y.csv"
    code, _, _ = _run(
        capsys, "simulate", "--n", "500", "--j", "1", "--seed", "2", "--out", str(out)
    )
    assert code == 0
    vals = read_csv_column(out)
    assert vals.shape == (500,)


def test_simulate_emulation_layout(tmp_path, capsys):
    out = tmp_path / "emu.f64"
    truth = tmp_path / "emu.json"
    code, _, _ = _run(
        capsys,
        "simulate", "--n", "6000000", "--emulate", "sig-1",
        "--seed", "3", "--out", str(out), "--truth", str(truth),
    )
    assert code == 0
    t = json.loads(truth.read_text())
    assert 60 <= len(t["taus"]) <= 62


def test_detect_stdout_report(tmp_path, capsys):
    out = tmp_path / "y.f64"
    _run(capsys, "simulate", "--n", "100000", "--j", "2", "--snr", "2.5",
         "--seed", "4", "--out", str(out))
    code, stdout, _ = _run(
        capsys, "detect", "--in", str(out), "--n1", "3000", "--seed", "1"
    )
    assert code == 0
    rep = json.loads(stdout)
    assert rep["j_hat"] == 2
    assert rep["timings_ms"] == {}
    assert all(e["ci_lo"] <= e["tau"] <= e["ci_hi"] for e in rep["estimates"])


def test_detect_report_file_deterministic(tmp_path, capsys):
    data = tmp_path / "y.f64"
    _run(capsys, "simulate", "--n", "80000", "--j", "2", "--seed", "6", "--out", str(data))
    r1 = tmp_path / "r1.json"
    r2 = tmp_path / "r2.json"
    for r in (r1, r2):
        code, _, _ = _run(
            capsys, "detect", "--in", str(data), "--n1", "2000",
            "--seed", "3", "--report", str(r),
        )
        assert code == 0
    assert r1.read_bytes() == r2.read_bytes()


def test_detect_timings_flag(tmp_path, capsys):
    data = tmp_path / "y.f64"
    _run(capsys, "simulate", "--n", "60000", "--j", "1", "--seed", "8", "--out", str(data))
    code, stdout, _ = _run(
        capsys, "detect", "--in", str(data), "--n1", "2000", "--seed", "1", "--timings"
    )
    assert code == 0
    assert "stage1_ms" in json.loads(stdout)["timings_ms"]


def test_detect_auto_builds_missing_table(tmp_path, capsys):
    data = tmp_path / "y.f64"
    _run(capsys, "simulate", "--n", "100000", "--j", "2", "--snr", "2.0",
         "--seed", "4", "--out", str(data))
    tab = tmp_path / "tab.tsv"
    code, stdout, stderr = _run(
        capsys, "detect", "--in", str(data), "--n1", "3000", "--seed", "1",
        "--table", str(tab), "--table-reps", "100000",
    )
    assert code == 0
    assert tab.exists()
    assert "not found" in stderr
    first = json.loads(stdout)

    # second run reads the table and must agree on the estimates
    code, stdout, stderr = _run(
        capsys, "detect", "--in", str(data), "--n1", "3000", "--seed", "1",
        "--table", str(tab), "--table-reps", "100000",
    )
    assert code == 0
    assert "not found" not in stderr
    second = json.loads(stdout)
    assert [e["tau"] for e in first["estimates"]] == [e["tau"] for e in second["estimates"]]
    table = read_table(tab)
    assert table.reps == 100000


def test_detect_missing_input_is_data_error(tmp_path, capsys):
    code, _, stderr = _run(capsys, "detect", "--in", str(tmp_path / "nope.f64"))
    assert code == 1
    assert "error" in stderr


def test_usage_error_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["detect"])  # --in is required
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["nosuchcommand"])


def test_plan_stdout(capsys):
    code, stdout, _ = _run(
        capsys, "plan", "--n", "1000000", "--j", "4", "--snr", "2.5"
    )
    assert code == 0
    p = json.loads(stdout)
    assert p["n1"] == 6325
    assert p["predicted_total"] == 25298


def test_plan_not_sublinear_is_data_error(capsys):
    code, _, stderr = _run(
        capsys, "plan", "--n", "2000", "--j", "10", "--snr", "0.5"
    )
    assert code == 1
    assert "sub-linear" in stderr


def test_quantiles_build_and_determinism(tmp_path, capsys):
    t1 = tmp_path / "t1.tsv"
    t2 = tmp_path / "t2.tsv"
    for t in (t1, t2):
        code, stdout, _ = _run(
            capsys, "quantiles", "--snr-grid", "1.5:2.5:0.5",
            "--alphas", "0.01,0.05", "--reps", "100000", "--seed", "3",
            "--out", str(t),
        )
        assert code == 0
        assert json.loads(stdout)["rows"] == 3
    assert t1.read_bytes() == t2.read_bytes()
    table = read_table(t1)
    assert table.snr_grid == [1.5, 2.0, 2.5]


def test_bench_writes_csv(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code, stdout, _ = _run(
        capsys, "bench", "--grid", "20000,50000", "--reps", "1",
        "--seed", "2", "--out", str(out),
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,rep,method,j_true,j_hat,touched_fraction,seconds"
    assert len(lines) == 1 + 2 * 2  # two sizes x (detect, full)
    summary = json.loads(stdout)
    assert "slope_detect" in summary and "slope_full" in summary


def test_run_bench_rows_deterministic_apart_from_time():
    rows1, _ = run_bench([20_000, 50_000], reps=1, seed=5)
    rows2, _ = run_bench([20_000, 50_000], reps=1, seed=5)
    strip = lambda rows: [
        {k: v for k, v in r.items() if k != "seconds"} for r in rows
    ]
    assert strip(rows1) == strip(rows2)


def test_coverage_csv(tmp_path, capsys):
    cfg = tmp_path / "cov.json"
    cfg.write_text(json.dumps({"n": 50_000, "j": 2, "snr": 2.0, "n1": 2000}))
    out = tmp_path / "cov.csv"
    code, stdout, _ = _run(
        capsys, "coverage", "--config", str(cfg), "--reps", "5",
        "--nominal", "0.90", "--seed", "1", "--table-reps", "100000",
        "--out", str(out),
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "nominal,reps,j_correct,covered,j_rate,coverage"
    assert len(lines) == 2
    row = lines[1].split(",")
    assert row[0] == "0.9" and row[1] == "5"


def test_run_coverage_counts():
    rows = run_coverage(
        {"n": 50_000, "j": 2, "snr": 2.5, "n1": 2000},
        reps=4,
        nominals=[0.9],
        seed=3,
        table_reps=100_000,
    )
    assert rows[0]["reps"] == 4
    assert 0 <= rows[0]["covered"] <= rows[0]["j_correct"] <= 4
