import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lambdaflow.cli import EXIT_MATH, EXIT_OK, EXIT_USAGE, main
from lambdaflow.errors import ConfigError
from lambdaflow.fileio import (
    curve_from_dict,
    curve_to_dict,
    load_curve,
    load_reparam,
    reparam_from_dict,
    reparam_to_dict,
    save_curve,
    save_reparam,
)
from lambdaflow.metric import SampledCurve, TimeReparam
from lambdaflow.problems import degenerate_solution, quadratic_solution, uniform_grid

from conftest import reversed_curve


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path, exp_curve, x_tau):
    save_curve(exp_curve, tmp_path / "exp.json")
    save_curve(reversed_curve(exp_curve), tmp_path / "rev.json")
    save_curve(x_tau[0.0], tmp_path / "x0.json")
    save_curve(x_tau[0.5], tmp_path / "xt.json")
    return tmp_path


class TestFormats:
    @settings(max_examples=30)
    @given(arrays(np.float64, (6, 2), elements=st.floats(-1e300, 1e300, allow_nan=False)))
    def test_curve_roundtrip_is_bit_exact(self, pts):
        c = SampledCurve(np.cumsum(np.r_[0.0, np.full(5, 0.1)]), pts)
        assert curve_from_dict(json.loads(json.dumps(curve_to_dict(c)))) == c

    def test_reparam_roundtrip(self, tmp_path):
        m = TimeReparam([0.0, 0.1, 0.3], [0.0, 1 / 30, 0.2])
        save_reparam(m, tmp_path / "z.json")
        assert load_reparam(tmp_path / "z.json") == m
        assert reparam_from_dict(reparam_to_dict(m)) == m

    def test_malformed(self, tmp_path):
        with pytest.raises(ConfigError):
            curve_from_dict({"times": [0, 1]})
        (tmp_path / "bad.json").write_text("{nope")
        with pytest.raises(ConfigError):
            load_curve(tmp_path / "bad.json")
        with pytest.raises(ConfigError):
            load_curve(tmp_path / "missing.json")


class TestSimulate:
    def test_exponential_endpoint(self, tmp_path, capsys):
        out = tmp_path / "c.json"
        code, _, err = run(["simulate", "--scenario", "quadratic", "--x0", 1, "--tau", 1e-3, "--horizon", 1,
                            "--out", out], capsys)
        assert code == EXIT_OK and "EDI max residual" in err
        c = load_curve(out)
        assert c.points[-1, 0] == pytest.approx(np.exp(-1), abs=5e-3)

    def test_equilibrium(self, capsys):
        code, out, _ = run(["simulate", "--scenario", "quadratic", "--x0", 0, "--tau", 0.1, "--horizon", 1], capsys)
        assert code == EXIT_OK
        assert set(np.ravel(json.loads(out)["points"])) == {0.0}

    def test_missing_scenario(self, capsys):
        code, _, err = run(["simulate", "--x0", 1], capsys)
        assert code == EXIT_USAGE and "--scenario" in err

    def test_bad_step(self, capsys):
        assert run(["simulate", "--scenario", "quadratic", "--tau", -1], capsys)[0] == EXIT_USAGE

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"name": "quadratic", "params": {"d": 2}}))
        code, out, _ = run(["simulate", "--config", cfg, "--x0", 1, 1, "--tau", 0.1, "--horizon", 0.5], capsys)
        assert code == EXIT_OK and json.loads(out)["dim"] == 2

    def test_starting_outside_domain(self, capsys):
        code, _, _ = run(["simulate", "--scenario", "degenerate", "--x0", -1, "--tau", 0.1], capsys)
        assert code == EXIT_MATH


class TestVerify:
    def test_solution(self, files, capsys):
        code, out, _ = run(["verify", "--scenario", "quadratic", "--in", files / "exp.json",
                            "--csv", files / "r.csv"], capsys)
        rep = json.loads(out)
        assert code == EXIT_OK and rep["edi"]["verdict"] == "pass" and rep["gronwall"]["passed"]
        assert (files / "r.csv").read_text().startswith("s,t,residual")

    def test_reversed(self, files, capsys):
        code, out, _ = run(["verify", "--scenario", "quadratic", "--in", files / "rev.json"], capsys)
        assert code == EXIT_MATH and json.loads(out)["edi"]["verdict"] == "fail"

    def test_same_in_and_out(self, files, capsys):
        code, _, _ = run(["verify", "--scenario", "quadratic", "--in", files / "exp.json",
                          "--out", files / "exp.json"], capsys)
        assert code == EXIT_USAGE


class TestMinimal:
    def test_waiting_curve(self, files, capsys):
        code, out, _ = run(["minimal", "--scenario", "degenerate", "--in", files / "xt.json"], capsys)
        res = json.loads(out)
        assert code == EXIT_OK
        assert res["report"]["verdict"] == "not-minimal"
        assert res["report"]["critical_measure"] == pytest.approx(0.5, abs=2e-3)
        w = curve_from_dict(res["curve"])
        assert np.max(np.abs(w.points - degenerate_solution(0.0, w.times))) <= 1e-12

    def test_departing_curve(self, files, capsys):
        code, out, _ = run(["minimal", "--scenario", "degenerate", "--in", files / "x0.json"], capsys)
        res = json.loads(out)
        assert res["report"]["verdict"] == "minimal"
        z = reparam_from_dict(res["reparam"])
        assert np.array_equal(z.values, z.grid)

    def test_non_solution(self, files, capsys):
        code, out, err = run(["minimal", "--scenario", "quadratic", "--in", files / "rev.json"], capsys)
        assert code == EXIT_MATH and json.loads(out)["verdict"] == "fail"

    def test_unreadable(self, tmp_path, capsys):
        code, _, _ = run(["minimal", "--scenario", "quadratic", "--in", tmp_path / "none.json"], capsys)
        assert code == EXIT_USAGE


class TestOrder:
    def test_delay_detected(self, tmp_path, capsys):
        t0 = uniform_grid(1.5, 1e-3)
        t1 = uniform_grid(2.0, 1e-3)
        save_curve(SampledCurve(t0, degenerate_solution(0.0, t0)), tmp_path / "a.json")
        save_curve(SampledCurve(t1, degenerate_solution(0.5, t1)), tmp_path / "b.json")
        code, out, _ = run(["order", "--u", tmp_path / "b.json", "--v", tmp_path / "a.json"], capsys)
        res = json.loads(out)
        assert code == EXIT_OK and res["precedes"]
        z = reparam_from_dict(res["witness"])
        assert np.max(np.abs(z.values - np.maximum(z.grid - 0.5, 0.0))) <= 2e-3
        code, out, _ = run(["order", "--u", tmp_path / "a.json", "--v", tmp_path / "b.json"], capsys)
        assert json.loads(out) == {"precedes": False, "witness": None}


class TestCantorDemo:
    def test_depth_six(self, tmp_path, capsys):
        code, out, _ = run(["cantor-demo", "--depth", 6, "--out-dir", tmp_path], capsys)
        s = json.loads(out)
        assert code == EXIT_OK
        assert s["u_verdict"] == "not-minimal" and s["w_verdict"] == "minimal"
        assert s["u_critical_measure"] == pytest.approx(s["injected_mass"], rel=0.1)
        assert s["phi_strictly_decreasing_u"] and s["u_solution"]
        assert s["recovered_distance"] <= 10 * s["grid_step"]
        for name in ("w.json", "u.json", "recovered.json", "u_edi.json", "w_minimality.json", "u_phi.csv"):
            assert (tmp_path / name).exists()
        with open(tmp_path / "u_phi.csv") as fh:
            phi = [float(r["phi"]) for r in csv.DictReader(fh)]
        assert np.all(np.diff(phi) < 0)

    def test_depth_one(self, capsys):
        code, out, _ = run(["cantor-demo", "--depth", 1], capsys)
        s = json.loads(out)
        assert s["u_verdict"] == "not-minimal" and s["w_critical_measure"] <= 2e-3

    def test_depth_out_of_range(self, capsys):
        assert run(["cantor-demo", "--depth", 25], capsys)[0] == EXIT_USAGE


class TestAxioms:
    def test_deterministic_and_seed_override(self, tmp_path, capsys, monkeypatch):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run(["axioms", "--scenario", "degenerate", "--seed", 0, "--trials", 10, "--out", a], capsys)[0] == 0
        monkeypatch.setenv("LAMBDAFLOW_SEED", "0")
        assert run(["axioms", "--scenario", "degenerate", "--seed", 3, "--trials", 10, "--out", b], capsys)[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_adversarial_only(self, capsys):
        code, out, _ = run(["axioms", "--adversarial", "--trials", 2], capsys)
        res = json.loads(out)
        assert code == EXIT_OK
        assert res["suites"][0]["axioms"]["non_return"]["fails"] == 3

    def test_bad_seed_env(self, capsys, monkeypatch):
        monkeypatch.setenv("LAMBDAFLOW_SEED", "abc")
        assert run(["axioms", "--adversarial"], capsys)[0] == EXIT_USAGE

    def test_nothing_to_run(self, capsys):
        assert run(["axioms"], capsys)[0] == EXIT_USAGE


class TestPlotData:
    def test_exponential_series(self, files, capsys):
        out = files / "plots"
        assert run(["plotdata", "--scenario", "quadratic", "--in", files / "exp.json", "--out-dir", out], capsys)[0] == 0
        with open(out / "phi.csv") as fh:
            rows = list(csv.DictReader(fh))
        t = np.array([float(r["t"]) for r in rows])
        phi = np.array([float(r["phi"]) for r in rows])
        assert np.allclose(phi, np.exp(-2 * t) / 2, rtol=1e-12)
        assert len(rows[1]["phi"].replace("-", "").replace(".", "").lstrip("0")) >= 15

    def test_plateau_in_slope(self, files, capsys):
        out = files / "plots"
        run(["plotdata", "--scenario", "degenerate", "--in", files / "xt.json", "--out-dir", out], capsys)
        with open(out / "g.csv") as fh:
            rows = [(float(r["t"]), float(r["g"])) for r in csv.DictReader(fh)]
        zero = [t for t, g in rows if g == 0.0]
        assert max(zero) == pytest.approx(0.5)

    def test_constant_curve_is_flat(self, tmp_path, capsys):
        save_curve(SampledCurve([0.0, 0.5, 1.0], [2.0, 2.0, 2.0]), tmp_path / "c.json")
        run(["plotdata", "--scenario", "quadratic", "--in", tmp_path / "c.json", "--out-dir", tmp_path], capsys)
        with open(tmp_path / "phi.csv") as fh:
            assert {r["phi"] for r in csv.DictReader(fh)} == {"2"}

    def test_reparam_series(self, files, capsys, tmp_path):
        save_reparam(TimeReparam([0.0, 1.0], [0.0, 0.5]), tmp_path / "z.json")
        out = files / "plots"
        run(["plotdata", "--scenario", "quadratic", "--in", files / "exp.json", "--reparam", tmp_path / "z.json",
             "--out-dir", out], capsys)
        assert (out / "z.csv").read_text().splitlines()[-1] == "1,0.5"

    def test_unreadable(self, tmp_path, capsys):
        code = run(["plotdata", "--scenario", "quadratic", "--in", tmp_path / "x.json", "--out-dir", tmp_path],
                   capsys)[0]
        assert code == EXIT_USAGE


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "lambdaflow.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("lambdaflow ")
    res = subprocess.run([sys.executable, "-m", "lambdaflow.cli", "simulate"], capture_output=True, text=True)
    assert res.returncode == EXIT_USAGE


def test_roundtrip_through_cli(tmp_path, capsys):
    t = uniform_grid(1.0, 1e-2)
    c = SampledCurve(t, quadratic_solution([np.pi], t))
    save_curve(c, tmp_path / "a.json")
    code, out, _ = run(["minimal", "--scenario", "quadratic", "--in", tmp_path / "a.json"], capsys)
    assert curve_from_dict(json.loads(out)["curve"]) == c
