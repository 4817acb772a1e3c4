import io
import math

import pytest

from blowup.cli import run
from blowup.report import RunConfig, diagnosis_lines, emit, read_series_csv
from blowup.quad import IntegralSeries, diagnose

INTEGRATE = ["integrate", "--f", "norm()^2", "--n", "2", "--p", "2",
             "--domain", "ball:0,0:1", "--eps", "1e-2", "--levels", "5", "--ratio", "0.1"]


def call(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def data_lines(text):
    return [ln for ln in text.splitlines() if not ln.startswith("#")]


def test_integrate_matches_closed_form():
    code, out, _ = call(INTEGRATE)
    assert code == 0
    rows = data_lines(out)
    assert rows[0] == "eps,value,err,converged"
    assert len(rows) == 6
    for row in rows[1:]:
        eps, value, _, conv = row.split(",")
        exact = 4 * math.pi * math.log(1 / float(eps))
        assert float(value) == pytest.approx(exact, rel=0.01) and conv == "true"


def test_header_round_trips_to_config():
    _, out, _ = call(INTEGRATE)
    cfg = RunConfig.from_header(out.splitlines()[:2])
    assert cfg.command == "integrate" and cfg.f == "norm()^2" and cfg.n == 2
    assert cfg.p == 2.0 and cfg.levels == 5 and cfg.seed == 42
    assert RunConfig.from_json(cfg.to_json()) == cfg


def test_report_has_classification_first():
    code, out, _ = call(INTEGRATE + ["--format", "report"])
    assert code == 0
    assert data_lines(out)[0] == "classification: divergent-log"


def test_output_file_and_diagnose_round_trip(tmp_path):
    path = tmp_path / "series.csv"
    code, out, _ = call(INTEGRATE + ["--out", str(path)])
    assert code == 0 and out == ""
    s = read_series_csv(path)
    assert len(s) == 5
    code, out, _ = call(["diagnose", "--input", str(path), "--format", "report"])
    assert code == 0 and data_lines(out)[0] == "classification: divergent-log"


def test_diagnose_inconclusive_exits_2(tmp_path):
    path = tmp_path / "noisy.csv"
    path.write_text("eps,value,err,converged\n0.01,1.0,0.5,true\n"
                    "0.001,3.0,0.5,true\n0.0001,2.0,0.5,true\n")
    code, out, _ = call(["diagnose", "--input", str(path)])
    assert code == 2 and "inconclusive" in out


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["integrate", "--bogus", "1"],
    [],
    ["integrate", "--f", "x1", "--n", "1", "--domain", "box:0:1"],    # missing --p
    ["integrate", "--f", "2 x1", "--n", "1", "--p", "1", "--domain", "box:0:1"],
    ["integrate", "--f", "x1", "--n", "2", "--p", "1", "--domain", "box:0:1"],
    ["diagnose", "--input", "/nonexistent/series.csv"],
    ["critical-p", "--f", "x1", "--n", "1", "--domain", "box:-1:1",
     "--lo", "1.5", "--hi", "2.5"],
])
def test_input_errors_exit_1(argv):
    code, _, err = call(argv)
    assert code == 1 and err


def test_unwritable_output_names_path():
    code, _, err = call(INTEGRATE + ["--out", "/nonexistent/dir/out.csv"])
    assert code == 1 and "/nonexistent/dir/out.csv" in err


def test_cgw_command():
    code, out, _ = call(["cgw", "--n", "3", "--R", "1", "--A", "1", "--B", "2.718281828",
                         "--eps", "2"])
    assert code == 0
    assert "# verify passed: true" in out
    assert data_lines(out)[0] == "r,psi,dpsi"


@pytest.mark.parametrize("argv", [
    ["rays", "--f", "norm()^2", "--n", "2", "--center", "0,0", "--rays", "8"],
    ["bbm", "--f", "x1", "--n", "2", "--domain", "box:0,0:1,1", "--strata", "8"],
    ["lemma21", "--f", "x1", "--p", "1"],
    ["lemma22", "--f", "max(abs(x1),abs(x2))", "--n", "2"],
    ["ode-unique", "--f", "abs(x1)^(-0.5)"],
])
def test_commands_are_deterministic(argv):
    first = call(argv)
    assert first[0] == 0
    assert call(argv) == first


def test_extend_command(tmp_path):
    samples = tmp_path / "s.csv"
    samples.write_text("x1,value\n0,0\n1,1\n")
    code, out, _ = call(["extend", "--input", str(samples), "--L", "1",
                         "--domain", "box:0:1", "--grid", "3"])
    assert code == 0
    # at x = 1 both samples are active; the lowest index (sample 0) wins the tie
    assert data_lines(out) == ["x1,value,g1", "0.0,0.0,0.0", "0.5,0.5,1.0", "1.0,1.0,1.0"]


def test_emit_writes_newline_endings(tmp_path):
    path = tmp_path / "x.txt"
    d = diagnose(IntegralSeries.from_values([1e-2, 1e-3, 1e-4], [1.0, 2.0, 3.0]))
    emit(diagnosis_lines(d), path)
    data = path.read_bytes()
    assert b"\r" not in data and data.endswith(b"\n")
    assert data.startswith(b"classification: ")
