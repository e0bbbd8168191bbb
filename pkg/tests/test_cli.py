import json
import math

import numpy as np
import pytest

from spheig.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_exponent_arc_closed_form(capsys, tmp_path):
    out_path = tmp_path / "run.json"
    code, out = run_cli(capsys, "exponent", "--p", "2", "--domain", "arc",
                        "--alpha", str(math.pi / 2), "--dim", "2",
                        "--branch", "singular", "--out", str(out_path),
                        "--no-timing")
    assert code == 0
    assert out == ""
    rec = json.loads(out_path.read_text())
    assert abs(rec["beta"] - 2.0) <= 1e-8
    assert rec["bracket_gap"] <= 1e-3
    lo, hi = rec["beta_bracket"]
    assert lo <= 2.0 + 1e-6 and hi >= 2.0 - 1e-6
    assert rec["tol"] > 0.0


def test_exponent_cap_regular(capsys):
    code, out = run_cli(capsys, "exponent", "--p", "3", "--domain", "cap",
                        "--alpha", str(math.pi / 2), "--dim", "3",
                        "--branch", "regular", "--no-timing")
    assert code == 0
    rec = json.loads(out)
    assert abs(rec["beta"] + 1.0) <= 1e-6


def test_exponent_with_bracket_steps(capsys):
    code, out = run_cli(capsys, "exponent", "--p", "2", "--domain", "arc",
                        "--alpha", "2.0", "--dim", "2", "--branch", "singular",
                        "--steps", "3", "--no-timing")
    assert code == 0
    rec = json.loads(out)
    approx = rec["approximation"]
    assert len(approx["beta_inner"]) == 4
    inner = [abs(b) for b in approx["beta_inner"]]
    assert all(b <= a + 1e-9 for a, b in zip(inner, inner[1:]))


def test_sweep_closed_forms(capsys, tmp_path):
    csv = tmp_path / "sweep.csv"
    code, out = run_cli(capsys, "sweep", "--p", "2",
                        "--alpha", f"{math.pi/4},{math.pi/2},{math.pi}",
                        "--dim", "2", "--domain", "arc",
                        "--branch", "singular", "--out", str(csv),
                        "--no-timing")
    assert code == 0
    lines = csv.read_text().splitlines()
    assert lines[0].startswith("p,alpha,dim,branch,beta")
    betas = [float(row.split(",")[4]) for row in lines[1:]]
    assert np.allclose(betas, [4.0, 2.0, 1.0], atol=1e-7)


def test_sweep_empty_range_header_only(capsys, tmp_path):
    csv = tmp_path / "empty.csv"
    code, _ = run_cli(capsys, "sweep", "--p", "2", "--alpha", "2:0.5:1",
                      "--dim", "2", "--domain", "arc", "--out", str(csv),
                      "--no-timing")
    assert code == 0
    lines = csv.read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("p,alpha,")


def test_sweep_keeps_going_past_bad_rows(capsys, tmp_path):
    csv = tmp_path / "mixed.csv"
    code, _ = run_cli(capsys, "sweep", "--p", "2", "--alpha", "1.0,7.0",
                      "--dim", "2", "--domain", "arc", "--out", str(csv),
                      "--no-timing")
    assert code == 0
    lines = csv.read_text().splitlines()
    assert len(lines) == 3
    good = lines[1].split(",")
    assert float(good[4]) == pytest.approx(math.pi, abs=1e-7)
    bad = lines[2]
    assert bad.startswith("2,7") and bad.rstrip(",").endswith(
        bad.split(",")[-1]) and len(bad.split(",")[-1]) > 0


def test_verify_deterministic(capsys, tmp_path):
    code1, out1 = run_cli(capsys, "verify", "--seed", "7", "--trials", "200")
    code2, out2 = run_cli(capsys, "verify", "--seed", "7", "--trials", "200")
    assert code1 == code2 == 0
    assert out1 == out2
    assert "PASS" in out1 and "FAIL" not in out1


def test_verify_only_filter(capsys):
    code, out = run_cli(capsys, "verify", "--trials", "200",
                        "--only", "vector-inequality")
    assert code == 0
    names = [ln.split()[1] for ln in out.splitlines() if ln.startswith("PASS")]
    assert names and all("vector-inequality" in n for n in names)
    code, _ = run_cli(capsys, "verify", "--trials", "100", "--only", "zzz")
    assert code == 2


def test_cone_quarter_arc(capsys, tmp_path):
    report = tmp_path / "cone.csv"
    code, out = run_cli(capsys, "cone", "--p", "2", "--domain", "arc",
                        "--alpha", str(math.pi / 2), "--dim", "2",
                        "--a", "1", "--b", "256", "--out", str(report),
                        "--no-timing")
    assert code == 0
    rec = json.loads(out)
    assert rec["passed"] is True
    assert abs(rec["beta_fit"] - 2.0) / 2.0 <= 0.02
    assert rec["contraction"]["theta_fit"] <= rec["contraction"]["bound"] + 0.05
    assert len(rec["contraction"]["osc"]) >= 4
    text = report.read_text()
    assert text.startswith("# delta1,")
    assert "# beta_fit," in text


def test_cone_small_ratio_is_config_error(capsys):
    code, out = run_cli(capsys, "cone", "--p", "2", "--domain", "arc",
                        "--alpha", str(math.pi / 2), "--dim", "2",
                        "--a", "1", "--b", "2", "--no-timing")
    assert code == 2
    err = json.loads(out)["error"]
    assert err["type"] == "ConfigError"
    assert "--b" in err["message"]


def test_polygon_vertices_file(capsys, tmp_path):
    vf = tmp_path / "octant.txt"
    vf.write_text("kind = polygon\ndim = 3\n"
                  "vertex = 1 0 0\nvertex = 0 1 0\nvertex = 0 0 1\n")
    code, out = run_cli(capsys, "exponent", "--p", "2", "--domain", "polygon",
                        "--vertices-file", str(vf), "--dim", "3",
                        "--branch", "singular", "--mesh-h", "0.12",
                        "--no-timing")
    assert code == 0
    rec = json.loads(out)
    assert rec["beta"] == pytest.approx(4.0, abs=0.05)
    assert list(rec["solvers"]) == ["fem"]


def test_bad_flags_exit_2(capsys):
    for argv in (
        ["exponent", "--p", "0.9", "--domain", "arc", "--alpha", "1",
         "--dim", "2"],
        ["exponent", "--p", "2", "--domain", "arc", "--dim", "2"],
        ["sweep", "--p", "2", "--alpha", "1:0:2", "--dim", "2",
         "--domain", "arc"],
        ["sweep", "--p", "2", "--alpha", "1", "--dim", "2", "--domain",
         "cap"],
        ["cone", "--p", "2", "--domain", "arc", "--alpha", "1", "--dim", "2",
         "--a", "4", "--b", "2"],
    ):
        code, out = run_cli(capsys, *argv)
        assert code == 2, argv
        assert json.loads(out)["error"]["type"] in ("ConfigError", "RangeError")


def test_no_timing_outputs_are_byte_identical(capsys):
    args = ("exponent", "--p", "2.5", "--domain", "arc", "--alpha", "1.2",
            "--dim", "2", "--branch", "singular", "--no-timing")
    _, out1 = run_cli(capsys, *args)
    _, out2 = run_cli(capsys, *args)
    assert out1 == out2
