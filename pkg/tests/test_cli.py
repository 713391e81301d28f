import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from slicephase.cli import main
from slicephase.files import read_pulse, reference_pulse_path

from conftest import rabi_population

TINY = {
    "optimization": {"n_slices": 4, "total_T_us": 40.0, "dt_min_us": 8.0, "dt_max_us": 12.0,
                     "n_restarts": 1, "max_iterations": 40,
                     "training": {"n_delta": 3, "n_omega": 3}},
    "evaluation": {"n_r": 7, "n_v": 7},
}


def _write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def _evaluate(capsys, *args):
    assert main(["evaluate", *args]) == 0
    return json.loads(capsys.readouterr().out)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_baseline_file(tmp_path, capsys, omega0):
    assert main(["baseline", "--out", str(tmp_path)]) == 0
    pf = read_pulse(tmp_path / "baseline_pulse.json")
    assert pf.schedule.n_slices == 1
    assert pf.schedule.total_T == pytest.approx(np.pi / omega0, rel=1e-15)
    assert pf.schedule.total_T == pytest.approx(20e-6, rel=1e-14)
    assert pf.schedule.phases[0] == pytest.approx(1.5 * np.pi)
    capsys.readouterr()
    metrics = _evaluate(capsys, "--pulse", str(tmp_path / "baseline_pulse.json"), "--point", "0,1")
    assert metrics["F_ave"] == pytest.approx(1.0, abs=1e-15)


def test_evaluate_shipped_rectangular_on_single_point(capsys):
    metrics = _evaluate(capsys, "--pulse", str(reference_pulse_path("rectangular")),
                        "--point", "0,1")
    assert metrics["F_ave"] == pytest.approx(1.0, abs=1e-15)
    assert metrics["n_samples"] == 1


def test_evaluate_shipped_optimized_matches_metadata(capsys):
    path = reference_pulse_path("optimized_n20")
    metrics = _evaluate(capsys, "--pulse", str(path))
    assert metrics["F_ave"] == pytest.approx(read_pulse(path).metadata["F_ave"], abs=1e-9)
    assert metrics["P_e_min"] <= metrics["P_e_ave"] <= metrics["P_e_max"]
    assert metrics["f_real_min"] <= metrics["F_ave"] <= metrics["f_real_max"]


def test_evaluate_response_override_lowers_fidelity(capsys):
    path = str(reference_pulse_path("optimized_n20"))
    recorded = read_pulse(path).metadata["F_ave"]
    metrics = _evaluate(capsys, "--pulse", path, "--tau-us", "1.0")
    assert metrics["tau_resp_us"] == 1.0
    assert metrics["F_ave"] < recorded


def test_evaluate_writes_metrics_and_trace(tmp_path, capsys):
    path = str(reference_pulse_path("rectangular"))
    _evaluate(capsys, "--pulse", path, "--out", str(tmp_path), "--trace",
              "--temperature-uK", "1.0")
    assert json.loads((tmp_path / "metrics.json").read_text())["n_samples"] == 441
    rows = _rows(tmp_path / "fidelity_trace.csv")
    assert rows[0] == ["time_us", "fidelity_real"]
    assert float(rows[1][0]) == 0.0 and float(rows[-1][0]) == pytest.approx(20.0)


def test_optimize_is_deterministic(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", TINY)
    for name in ("a", "b"):
        assert main(["optimize", "--config", cfg, "--out", str(tmp_path / name), "--seed", "3"]) == 0
    a = (tmp_path / "a" / "pulse.json").read_bytes()
    assert a == (tmp_path / "b" / "pulse.json").read_bytes()
    pf = read_pulse(tmp_path / "a" / "pulse.json")
    assert pf.metadata["seed"] == 3
    assert pf.schedule.n_slices == 4
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert {"F_ave", "iterations", "best_restart", "wall_time_s"} <= set(summary)


def test_optimize_threads_do_not_change_output(tmp_path):
    cfg = _write(tmp_path / "c.json", TINY)
    main(["optimize", "--config", cfg, "--out", str(tmp_path / "a"), "--threads", "1"])
    main(["optimize", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "3"])
    assert (tmp_path / "a" / "pulse.json").read_bytes() == (tmp_path / "b" / "pulse.json").read_bytes()


def test_infeasible_bounds_exit_code_and_no_output(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"optimization": {"n_slices": 20, "dt_min_us": 11.0}})
    out = tmp_path / "out"
    assert main(["optimize", "--config", cfg, "--out", str(out)]) == 3
    assert not out.exists()
    assert "infeasible" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"ensemble": {"waist_m": -1}})
    assert main(["baseline", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "ensemble.waist_m" in capsys.readouterr().err


def test_malformed_pulse_exit_code(tmp_path, capsys):
    bad = tmp_path / "p.json"
    bad.write_text('{\n  "format_version": 1,\n  "N": 2\n  "phases_rad": []\n}')
    assert main(["evaluate", "--pulse", str(bad)]) == 2
    assert "line 4" in capsys.readouterr().err


def test_missing_pulse_exit_code(tmp_path):
    assert main(["evaluate", "--pulse", str(tmp_path / "nope.json")]) == 4


def test_missing_pulse_argument(tmp_path, capsys):
    assert main(["scan2d", "--out", str(tmp_path)]) == 2
    assert "pulse" in capsys.readouterr().err


def test_scan2d_rectangular_matches_rabi_oracle(tmp_path, omega0):
    assert main(["scan2d", "--pulse", str(reference_pulse_path("rectangular")),
                 "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "scan2d.csv")
    assert rows[0] == ["delta_over_omega0", "omega_over_omega0", "value"]
    assert len(rows) == 81 * 81 + 1
    data = np.array(rows[1:], dtype=float)
    # the delta slice at Omega = Omega0
    cut = data[np.isclose(data[:, 1], 1.0)]
    assert len(cut) == 81
    expected = rabi_population(omega0, cut[:, 0] * omega0, np.pi / omega0)
    np.testing.assert_allclose(cut[:, 2], expected, rtol=1e-11, atol=1e-12)


def test_scan2d_is_byte_deterministic(tmp_path):
    pulse = str(reference_pulse_path("optimized_n20"))
    cfg = _write(tmp_path / "c.json", {"scan2d": {"n_delta": 11, "n_omega": 9}})
    for name in ("a", "b"):
        main(["scan2d", "--config", cfg, "--pulse", pulse, "--out", str(tmp_path / name)])
    assert (tmp_path / "a" / "scan2d.csv").read_bytes() == (tmp_path / "b" / "scan2d.csv").read_bytes()


def test_sweep_temp_axis(tmp_path):
    cfg = _write(tmp_path / "c.json", {"evaluation": {"n_r": 7, "n_v": 7}})
    assert main(["sweep-temp", "--config", cfg, "--pulse", str(reference_pulse_path("rectangular")),
                 "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "sweep_temperature.csv")
    assert rows[0] == ["temperature_uK", "optimized", "rectangular"]
    axis = [float(r[0]) for r in rows[1:]]
    assert axis[0] == 0.3 and axis[-1] == 5.0
    assert all(r[1] == r[2] for r in rows[1:])


def test_sweep_resp_fixed_records_skipped_points(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"evaluation": {"n_r": 5, "n_v": 5},
                                       "sweeps": {"response_mode": "fixed",
                                                  "tau_values_us": [0.0, 1.0, 30.0]}})
    assert main(["sweep-resp", "--config", cfg, "--pulse",
                 str(reference_pulse_path("optimized_n20")), "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "sweep_response.csv")
    assert rows[0] == ["tau_resp_us", "optimized", "rectangular"]
    assert rows[3][1] == "nan"
    assert "skipped" in capsys.readouterr().err


def test_sweep_slices(tmp_path):
    cfg = _write(tmp_path / "c.json", {**TINY, "sweeps": {"n_values": [1, 3]}})
    assert main(["sweep-slices", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "sweep_slices.csv")
    assert rows[0] == ["n_slices", "optimized", "rectangular"]
    assert [r[0] for r in rows[1:]] == ["1", "3"]


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 5


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "slicephase", "--help"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    for name in ("optimize", "evaluate", "scan2d", "sweep-temp", "sweep-resp",
                 "sweep-slices", "baseline", "selftest"):
        assert name in proc.stdout
