import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from asode.cli import fitted_slope, main, run_verify
from asode.coeffs import METHOD_COEFFICIENTS


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr().out


def test_verify_passes(capsys):
    code, out = run(["verify"], capsys)
    assert code == 0 and "FAIL" not in out
    assert "| order conditions |" in out


def test_verify_detects_corrupted_constant():
    bad = METHOD_COEFFICIENTS.replace(p5=METHOD_COEFFICIENTS.p[4] + 1e-6)
    buf = io.StringIO()
    assert run_verify(buf, "csv", coeffs=bad) == 1
    assert "FAIL" in buf.getvalue()


def test_verify_csv_rows(capsys):
    code, out = run(["verify", "--format", "csv"], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    checks = {r[0]: r for r in rows if len(r) == 4 and r[-1] in ("pass", "FAIL")}
    assert float(checks["order conditions"][1]) < 1e-11
    assert float(checks["embedded conditions"][1]) < 1e-11
    # coefficient rows use 14-decimal scientific notation
    a_row = next(r for r in rows if len(r) == 4 and r[0] == "a")
    assert a_row[1] == "4.35866521508460e-01"


def test_verify_is_deterministic(capsys):
    _, first = run(["verify"], capsys)
    _, second = run(["verify"], capsys)
    assert first == second


def test_solve_csv_and_footer(capsys, tmp_path):
    code, out = run(["solve", "--problem", "ex4", "--tol", "1e-4"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,y1,y2,y3,y4"
    footer = dict(line[2:].split(",") for line in lines if line.startswith("# "))
    assert set(footer) >= {"accepted", "rejected", "phi_evals", "g_evals", "factorizations"}
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:] if not line.startswith("#")])
    assert data.shape == (int(footer["accepted"]) + 1, 5)
    assert data[-1, 0] == 20.0

    target = tmp_path / "out.csv"
    assert main(["solve", "--problem", "4", "--tol", "1e-4", "--output", str(target)]) == 0
    assert target.read_text() == out


def test_solve_options(capsys):
    code, out = run(["solve", "--problem", "ex1", "--method", "rkf5", "--tol", "1e-4", "--h0", "1e-3"], capsys)
    assert code == 0 and "# f_evals," in out
    code, out = run(["solve", "--problem", "ex4", "--tol", "1e-3", "--stability-control", "off",
                     "--jacobian", "fd-dense", "--freeze-age", "3"], capsys)
    assert code == 0


def test_bench_table(capsys):
    code, out = run(["bench", "--problems", "4", "--tols", "1e-4", "--methods", "asode3,rkf5",
                     "--against-paper", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1
    row = rows[0]
    assert row["asode3_published"] == "367411" and row["rkf5_published"] == "11366"
    assert float(row["rkf5_ratio"]) == pytest.approx(int(row["rkf5"]) / 11366, abs=1e-3)


def test_bench_reports_failed_runs(capsys):
    code, out = run(["bench", "--problems", "4", "--tols", "1e-2", "--methods", "rkm4"], capsys)
    assert code == 1 and "failed (StepSizeUnderflow)" in out


def test_convergence_asode3(capsys):
    code, out = run(["convergence", "--method", "asode3", "--grid", "1e-2,3e-3,1e-3,3e-4,1e-4"], capsys)
    assert code == 0
    slope = float(next(line for line in out.splitlines() if line.startswith("# slope")).split(",")[1])
    assert slope == pytest.approx(3.0, abs=0.1)


def test_convergence_rkf5(capsys):
    code, out = run(["convergence", "--method", "rkf5", "--grid", "0.02,0.01,0.005"], capsys)
    assert code == 0


def test_fitted_slope():
    h = np.array([0.1, 0.05, 0.025])
    assert fitted_slope(h, 7 * h ** 3) == pytest.approx(3.0)


@pytest.mark.parametrize("argv", [
    ["convergence", "--grid", "0.1"],
    ["convergence", "--grid", "0.1,0.05"],
    ["solve", "--problem", "1", "--tol", "0"],
    ["solve", "--problem", "1", "--tol", "-1e-3"],
    ["solve", "--problem", "1", "--tol", "1e-3", "--h0", "0"],
    ["solve", "--problem", "1", "--tol", "1e-3", "--freeze-age", "0"],
    ["solve", "--problem", "1", "--tol", "1e-3", "--bogus"],
    ["bench", "--methods", "dp8"],
    ["verify", "--format", "json"],
])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_unknown_problem_exit_status(capsys):
    assert main(["solve", "--problem", "ex7", "--tol", "1e-3"]) == 2
    assert "unknown problem" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "asode", "verify", "--format", "csv"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0 and "stiff decay" in proc.stdout
