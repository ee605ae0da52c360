from __future__ import annotations

import json
import subprocess
import sys

import pytest

from confined_tracer.cli import main
from confined_tracer.io import read_csv


def _body(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


def test_simulate_writes_csv_and_manifest(tmp_path, capsys):
    rc = main(["simulate", "--t", "200", "--replicas", "4", "--threads", "1", "--seed", "3",
               "--log", "5", "--out", str(tmp_path)])
    assert rc == 0
    meta, header, rows = read_csv(tmp_path / "simulate_ensemble.csv")
    assert meta["schema"].startswith("confined_tracer/") and meta["schema"].endswith("/v1")
    assert len(rows) == 4
    man = json.loads((tmp_path / "simulate_manifest.json").read_text())
    assert man["command"] == "simulate" and man["seed"] == 3
    assert "simulate_ensemble.csv" in man["outputs"] and "simulate_collisions.csv" in man["outputs"]
    assert len(read_csv(tmp_path / "simulate_collisions.csv")[2]) == 5
    assert "j* =" in capsys.readouterr().out


def test_simulate_reproducible_across_threads(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["simulate", "--t", "100", "--replicas", "5", "--seed", "9"]
    assert main(args + ["--threads", "1", "--out", str(a)]) == 0
    assert main(args + ["--threads", "2", "--out", str(b)]) == 0
    assert _body(a / "simulate_ensemble.csv") == _body(b / "simulate_ensemble.csv")


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CONFINED_TRACER_SEED", "77")
    monkeypatch.setenv("CONFINED_TRACER_OUT", str(tmp_path))
    assert main(["simulate", "--t", "50", "--replicas", "2", "--threads", "1"]) == 0
    assert json.loads((tmp_path / "simulate_manifest.json").read_text())["seed"] == 77


@pytest.mark.parametrize("argv", [
    ["simulate"],
    ["simulate", "--t", "-1"],
    ["simulate", "--t", "10", "--replicas", "0"],
    ["simulate", "--t", "10", "--beta-left", "1", "--temp-mean", "1"],
    ["simulate", "--t", "10", "--beta-left", "-1"],
    ["cgf", "--lambda-min", "-2", "--lambda-max", "0.2"],
    ["cgf", "--lambda-min", "0.2", "--lambda-max", "0.1"],
    ["scaling", "--epsilons", "0.05,0.1"],
    ["figures", "--points", "2"],
    ["nonsense"],
])
def test_usage_errors_exit_2(tmp_path, argv):
    with pytest.raises(SystemExit) as exc:
        main(argv + ["--out", str(tmp_path)] if argv[0] != "nonsense" else argv)
    assert exc.value.code == 2


def test_temperature_flags(tmp_path):
    assert main(["cgf", "--temp-mean", "1.5", "--temp-gap", "1", "--lambda-min", "-0.9",
                 "--lambda-max", "0.4", "--points", "5", "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "cgf_manifest.json").read_text())
    assert man["parameters"]["beta_left_resolved"] == pytest.approx(0.5)
    assert man["parameters"]["beta_right_resolved"] == pytest.approx(1.0)


def test_cgf_equilibrium_grid_through_zero(tmp_path):
    assert main(["cgf", "--beta-left", "1", "--beta-right", "1", "--lambda-min", "-0.5",
                 "--lambda-max", "0.5", "--points", "11", "--out", str(tmp_path)]) == 0


def test_cgf_boundary_guard_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["cgf", "--lambda-min", "-0.5", "--lambda-max", "0.4999999", "--points", "3", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_rate_symmetric_grid(tmp_path, capsys):
    assert main(["rate", "--j-min", "-0.5", "--j-max", "0.5", "--points", "5", "--out", str(tmp_path)]) == 0
    assert "symmetry residual" in capsys.readouterr().out
    _, header, rows = read_csv(tmp_path / "rate_curve.csv")
    assert header == ["x", "value", "region"] and len(rows) == 5


def test_scaling_reports_failure_with_exit_1(tmp_path):
    # the default tolerance is not met on this grid, which must surface as exit 1
    rc = main(["scaling", "--points", "5", "--epsilons", "0.1,0.05", "--out", str(tmp_path)])
    assert rc == 1
    assert (tmp_path / "scaling_convergence.csv").exists()


def test_scaling_passes_with_loose_tolerance(tmp_path):
    assert main(["scaling", "--points", "5", "--epsilons", "0.1,0.05", "--tolerance", "1",
                 "--out", str(tmp_path)]) == 0


def test_figures_values(tmp_path):
    assert main(["figures", "--points", "7", "--out", str(tmp_path)]) == 0
    for name, expected in (("figure_G.csv", {1.0: 0.0, 0.0: 0.0, -1.0: 1.0}),
                           ("figure_H.csv", {0.0: 0.0, -1.0: 0.0, 1.0: 2.0})):
        _, _, rows = read_csv(tmp_path / name)
        table = {float(r[0]): float(r[1]) for r in rows}
        for x, v in expected.items():
            assert table[x] == pytest.approx(v, abs=1e-12)
    assert "plot" in (tmp_path / "figures.gp").read_text()


def test_figure_seams_detect_wrong_conventions(tmp_path):
    from confined_tracer.figures import seam_residuals
    from confined_tracer.rate import limit_curve

    limit_curve("G", [-1.0, -0.5, 0.0, 0.5, 1.0], 1.0, 1.0, kappa=2.0).to_csv(tmp_path / "g.csv")
    assert all(r == float("inf") for r in seam_residuals(tmp_path / "g.csv", "G").values())


def test_tilt_command(tmp_path):
    rc = main(["tilt", "--t", "500", "--replicas", "4", "--threads", "1", "--epsilons", "0.1",
               "--etas", "0.3", "--out", str(tmp_path)])
    assert rc in (0, 1)
    assert (tmp_path / "tilt_certificate.csv").exists()
    with pytest.raises(SystemExit) as exc:
        main(["tilt", "--target-j", "5", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_verify_negative_control_exits_1(capsys):
    # with every tolerance scaled to 0 the inexact checks must fail
    from confined_tracer import acceptance

    class Tiny(acceptance.Suite):
        def checks(self):
            return [self.gc_symmetry, self.slope_at_origin, self.flat_window]

    orig = acceptance.Suite
    acceptance.Suite = Tiny
    try:
        rc = main(["verify", "--tolerance-scale", "0", "--threads", "1"])
    finally:
        acceptance.Suite = orig
    out = capsys.readouterr().out
    assert rc == 1 and ">> [FAIL] #6" in out and "[PASS] #4" in out


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "confined_tracer", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
    res = subprocess.run([sys.executable, "-m", "confined_tracer", "simulate"], capture_output=True, text=True)
    assert res.returncode == 2
