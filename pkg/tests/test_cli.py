import csv
import hashlib
import json
import math
import shutil
import subprocess
import sys

import pytest

from conftest import MODELS
from inducedflow.cli import EXIT_MODEL, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, EXIT_VERIFY, main, parse_beta_grid, UsageError


def run(tmp_path, *args, out="out"):
    target = tmp_path / out
    code = main([*map(str, args), "--out", str(target)])
    return code, target


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def model_file(tmp_path, text, name="m.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


THREE = """schema_version = 1
family = "finite-linear"
[base]
lo = 0.0
hi = 1.0
[branches]
widths = [1.0, 1.0, 1.0]
roofs = [1.0, 1.0, 1.0]
[potential]
const = -0.4
"""


class TestMME:
    def test_doubling(self, tmp_path, capsys):
        code, out = run(tmp_path, "mme", "--model", MODELS / "doubling.toml")
        assert code == EXIT_OK
        assert json.loads((out / "mme.json").read_text())["h_top"] == pytest.approx(math.log(2), abs=1e-9)
        rows = read_csv(out / "cylinders.csv")
        assert len(rows) == 16 and sum(float(r["measure"]) for r in rows) == pytest.approx(1.0)
        assert "h_top" in capsys.readouterr().out

    def test_three_branches(self, tmp_path):
        code, out = run(tmp_path, "mme", "--model", model_file(tmp_path, THREE))
        assert code == EXIT_OK
        assert json.loads((out / "mme.json").read_text())["h_top"] == pytest.approx(math.log(3), abs=1e-9)

    def test_malformed_model(self, tmp_path, capsys):
        bad = model_file(tmp_path, "schema_version = 1\nfamily = ")
        code, out = run(tmp_path, "mme", "--model", bad)
        assert code == EXIT_MODEL and not out.exists()
        assert [p.name for p in tmp_path.iterdir()] == ["m.toml"]
        assert "error" in capsys.readouterr().err


class TestPressureCurve:
    def test_affine_column(self, tmp_path, capsys):
        code, out = run(tmp_path, "pressure-curve", "--model", model_file(tmp_path, THREE),
                        "--beta-grid", "0:2:0.25", "--threads", 2)
        assert code == EXIT_OK
        rows = read_csv(out / "pressure_curve.csv")
        assert [*rows[0]] == ["beta", "pressure", "zc", "regime", "lambda_margin", "mean_roof", "entropy_flow"]
        assert len(rows) == 9
        for r in rows:
            assert float(r["pressure"]) == pytest.approx(-0.4 * float(r["beta"]) + math.log(3), abs=1e-9)
        assert "beta_c" not in capsys.readouterr().out
        assert "beta_c" not in json.loads((out / "pressure_curve.json").read_text())

    def test_phase_flip(self, tmp_path, capsys):
        code, out = run(tmp_path, "pressure-curve", "--model", MODELS / "phase.toml", "--beta-grid", "0:2:0.2")
        assert code == EXIT_OK
        regimes = [r["regime"] for r in read_csv(out / "pressure_curve.csv")]
        assert sum(a != b for a, b in zip(regimes, regimes[1:])) == 1
        line = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("beta_c")]
        assert len(line) == 1
        summary = json.loads((out / "pressure_curve.json").read_text())
        lo, hi = summary["beta_c_interval"]
        assert hi - lo <= 1e-3

    @pytest.mark.parametrize("grid", ["1:0:0.1", "0:1:0", "a:b:c", "0:1"])
    def test_bad_grid_is_usage_error(self, tmp_path, grid):
        code, out = run(tmp_path, "pressure-curve", "--model", MODELS / "doubling.toml", "--beta-grid", grid)
        assert code == EXIT_USAGE and not out.exists()

    def test_parse_beta_grid(self):
        assert list(parse_beta_grid("0:1:0.5")) == [0.0, 0.5, 1.0]
        assert len(parse_beta_grid("0:0.3:0.1")) == 4
        with pytest.raises(UsageError):
            parse_beta_grid("-1:1:0.5")


class TestVerify:
    def test_doubling_passes(self, tmp_path):
        code, out = run(tmp_path, "verify", "--model", MODELS / "doubling.toml")
        assert code == EXIT_OK
        rows = read_csv(out / "verify.csv")
        assert {r["check"] for r in rows} >= {"coboundary_identity", "cocycle", "distortion", "gibbs_bounds",
                                              "ordering_chain", "abramov_identity", "roof_positivity"}
        assert all(r["status"] in ("pass", "skipped") for r in rows)

    def test_r_min_violation_names_branch(self, tmp_path):
        code, out = run(tmp_path, "verify", "--model", MODELS / "bad_rmin.toml")
        assert code == EXIT_VERIFY
        row = next(r for r in read_csv(out / "verify.csv") if r["check"] == "roof_positivity")
        assert row["status"] == "fail" and "branch 2" in row["detail"]
        assert json.loads((out / "verify.json").read_text())["passed"] is False

    def test_coarse_grid_reports_depth_limit(self, tmp_path):
        code, out = run(tmp_path, "verify", "--model", MODELS / "doubling.toml", "--grid", 16)
        row = next(r for r in read_csv(out / "verify.csv") if r["check"] == "gibbs_bounds")
        assert row["status"] == "limited" and "depth <= 3" in row["detail"]

    def test_skew_model(self, tmp_path):
        code, out = run(tmp_path, "verify", "--model", MODELS / "skew.toml")
        assert code == EXIT_OK
        row = next(r for r in read_csv(out / "verify.csv") if r["check"] == "coboundary_identity")
        assert row["status"] == "pass"


class TestOtherCommands:
    def test_pressure_outputs(self, tmp_path):
        code, out = run(tmp_path, "pressure", "--model", MODELS / "golden.toml", "--beta", 1)
        assert code == EXIT_OK
        assert sorted(p.name for p in out.iterdir()) == ["manifest.json", "pressure.json", "spectral.json",
                                                          "spectral_nodes.csv", "timing.json"]
        res = json.loads((out / "pressure.json").read_text())
        assert res["pressure"] == pytest.approx(0.4812118250596, abs=1e-9) and res["regime"] == "regular"
        assert len(read_csv(out / "spectral_nodes.csv")) == 512

    def test_gibbs(self, tmp_path):
        code, out = run(tmp_path, "gibbs", "--model", MODELS / "skew.toml", "--depth", 4)
        assert code == EXIT_OK
        g = json.loads((out / "gibbs.json").read_text())
        assert g["max_log_gibbs_ratio"] <= g["K_gibbs"] and g["additivity_residual"] <= 1e-8

    def test_zc(self, tmp_path):
        code, out = run(tmp_path, "zc", "--model", MODELS / "phase.toml")
        assert code == EXIT_OK
        assert json.loads((out / "zc.json").read_text())["value"] == pytest.approx(-0.3, abs=0.01)
        assert len(read_csv(out / "zc_partial.csv")) == 40

    def test_emit_json_only(self, tmp_path):
        code, out = run(tmp_path, "pressure", "--model", MODELS / "doubling.toml", "--emit", "json")
        assert code == EXIT_OK and not list(out.glob("*.csv"))

    def test_solver_error_exit(self, tmp_path):
        code, out = run(tmp_path, "pressure", "--model", MODELS / "golden.toml", "--cutoff", 1)
        assert code == EXIT_SOLVER and not out.exists()

    @pytest.mark.parametrize("argv", [["fly"], ["mme"], ["mme", "--model", "x", "--grid", "8"],
                                      ["mme", "--model", "x", "--emit", "xml"]])
    def test_usage_errors(self, argv):
        assert main(argv) == EXIT_USAGE


class TestManifest:
    def test_contents(self, tmp_path):
        path = MODELS / "doubling.toml"
        code, out = run(tmp_path, "pressure", "--model", path, "--threads", 1)
        man = json.loads((out / "manifest.json").read_text())
        assert man["schema_version"] == 1 and man["command"] == "pressure"
        assert man["model_sha256"] == hashlib.sha256(path.read_bytes()).hexdigest()
        assert man["config"]["grid"] == 512 and man["config"]["tol"] == 1e-10
        assert "wall_time_s" not in json.dumps(man)
        assert json.loads((out / "timing.json").read_text())["wall_time_s"] >= 0

    @pytest.mark.parametrize("cmd", [["pressure-curve", "--beta-grid", "0:1.5:0.5"], ["gibbs"], ["verify"]])
    def test_bit_for_bit_reruns(self, tmp_path, cmd):
        args = [*cmd, "--model", str(MODELS / "phase.toml"), "--threads", "2"]
        first, out = run(tmp_path, *args)
        saved = {p.name: p.read_bytes() for p in out.iterdir() if p.name != "timing.json"}
        shutil.rmtree(out)
        second, out = run(tmp_path, *args)
        assert first == second
        assert {p.name: p.read_bytes() for p in out.iterdir() if p.name != "timing.json"} == saved


def test_console_script(tmp_path):
    exe = shutil.which("inducedflow")
    cmd = [exe] if exe else [sys.executable, "-m", "inducedflow.cli"]
    res = subprocess.run([*cmd, "mme", "--model", str(MODELS / "golden.toml"), "--out", str(tmp_path / "o")],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and "h_top = 0.48121182505" in res.stdout
