import json

import numpy as np
import pytest

from nvgyro import triangle_profile
from nvgyro.cli import main
from nvgyro.io import read_table

# small, fast configs for the CLI round trips
FRINGES_CFG = """\
[sequence]
phase_reference = resonant
dq_detuning = 2000.0

[fringes]
tau_min = 1e-6
tau_max = 5e-3
points = 400

[run]
seed = 3
"""

ABSOLUTE_CFG = """\
[fringes]
tau_min = 0.0
tau_max = 5e-3
points = 4000
"""


@pytest.fixture
def fringes_cfg(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(FRINGES_CFG)
    return path


@pytest.fixture
def profile_csv(tmp_path):
    path = tmp_path / "profile.csv"
    triangle_profile(180.0, 1.8, cycles=1).to_csv(path)
    return path


class TestFringesCommand:
    def test_outputs_and_manifest(self, tmp_path, fringes_cfg, capsys):
        out = tmp_path / "out"
        rc = main(["fringes", "--config", str(fringes_cfg), "--out", str(out)])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "fringes"
        assert manifest["seed"] == 3
        for name in manifest["outputs"]:
            assert (out / name).exists()
        expected = {f"fringes_r{j}.csv" for j in range(1, 5)}
        expected |= {f"spectrum_r{j}.csv" for j in range(1, 5)}
        expected |= {"fringes_combined.csv", "spectrum_combined.csv", "fit.json"}
        assert set(manifest["outputs"]) == expected
        # no orphan outputs beyond the manifest itself
        on_disk = {p.name for p in out.iterdir()}
        assert on_disk == expected | {"manifest.json"}
        fit = json.loads((out / "fit.json").read_text())
        assert fit["f_hz"] == pytest.approx(2000.0, abs=3 * fit["f_sigma_hz"])

    def test_absolute_mode_recovers_dq_frequency(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(ABSOLUTE_CFG)
        out = tmp_path / "out"
        assert main(["fringes", "--config", str(cfg), "--out", str(out)]) == 0
        fit = json.loads((out / "fit.json").read_text())
        assert abs(fit["f_hz"] - 293.332e3) / 293.332e3 < 0.005

    def test_seeded_outputs_bitwise_identical(self, tmp_path, fringes_cfg):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["fringes", "--config", str(fringes_cfg), "--out", str(out1)])
        main(["fringes", "--config", str(fringes_cfg), "--out", str(out2)])
        for name in ("fringes_combined.csv", "fringes_r1.csv", "spectrum_combined.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_seed_flag_changes_noise(self, tmp_path, fringes_cfg):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["fringes", "--config", str(fringes_cfg), "--out", str(out1)])
        main(["fringes", "--config", str(fringes_cfg), "--seed", "99",
              "--out", str(out2)])
        a = read_table(out1 / "fringes_combined.csv")["signal"]
        b = read_table(out2 / "fringes_combined.csv")["signal"]
        assert not np.array_equal(a, b)

    def test_coarse_grid_error_surfaces(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "[sequence]\nphase_reference = resonant\ndq_detuning = 100.0\n"
            "[fringes]\ntau_min = 1e-6\ntau_max = 2e-3\npoints = 12\n"
        )
        rc = main(["fringes", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 1
        assert "period" in capsys.readouterr().err

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("[sequence]\nbogus_key = 1\n")
        rc = main(["fringes", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 1
        assert "bogus_key" in capsys.readouterr().err

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["fringes"])  # missing --out
        assert exc.value.code == 2


class TestGyroCommand:
    def test_sweep_run_regression(self, tmp_path, fringes_cfg, profile_csv):
        out = tmp_path / "out"
        rc = main(["gyro", "--config", str(fringes_cfg), "--profile",
                   str(profile_csv), "--out", str(out), "--duration", "120"])
        assert rc == 0
        report = json.loads((out / "regression.json").read_text())
        assert report["alpha_per_hz"] == pytest.approx(report["alpha0_per_hz"],
                                                       rel=0.02)
        assert report["alpha_stderr_per_hz"] < abs(report["alpha_per_hz"])
        rotation = read_table(out / "rotation.csv")
        assert np.allclose(rotation["nu_hat_dps"], rotation["nu_hat_hz"] * 360.0)
        telem = read_table(out / "telemetry.csv")
        assert set(telem) == {"t_s", "angle_deg", "rate_dps", "accel_dps2"}

    def test_zero_profile_mean_zero(self, tmp_path, fringes_cfg):
        profile = tmp_path / "zero.csv"
        profile.write_text("duration_s,rate_dps,accel_dps2\n30.0,0.0,1.8\n")
        out = tmp_path / "out"
        assert main(["gyro", "--config", str(fringes_cfg), "--profile",
                     str(profile), "--out", str(out)]) == 0
        rotation = read_table(out / "rotation.csv")
        n = len(rotation["nu_hat_hz"])
        sem = np.std(rotation["nu_hat_hz"]) / np.sqrt(n)
        assert abs(np.mean(rotation["nu_hat_hz"])) < 5 * sem + 1e-12

    def test_tracking_rms_within_shot_noise(self, tmp_path, fringes_cfg, profile_csv):
        out = tmp_path / "out"
        main(["gyro", "--config", str(fringes_cfg), "--profile",
              str(profile_csv), "--out", str(out), "--duration", "120"])
        report = json.loads((out / "regression.json").read_text())
        rotation = read_table(out / "rotation.csv")
        resid_hz = rotation["nu_hat_hz"] - rotation["table_rate_dps"] / 360.0
        from nvgyro import default_config
        from nvgyro.sequence import combined_sigma
        sigma_nu = combined_sigma(default_config().sequence) / abs(
            report["alpha0_per_hz"]
        )
        assert np.sqrt(np.mean(resid_hz**2)) < 3 * sigma_nu

    def test_piecewise_trace_profile_tracks_table(self, tmp_path, fringes_cfg):
        # arbitrary multi-segment program: gyro follows the table within
        # the shot-noise prediction
        profile = tmp_path / "trace.csv"
        profile.write_text(
            "duration_s,rate_dps,accel_dps2\n"
            "10.0,40.0,8.0\n5.0,-60.0,20.0\n8.0,15.0,10.0\n"
            "6.0,-120.0,40.0\n10.0,0.0,25.0\n"
        )
        out = tmp_path / "out"
        assert main(["gyro", "--config", str(fringes_cfg), "--profile",
                     str(profile), "--out", str(out)]) == 0
        report = json.loads((out / "regression.json").read_text())
        rotation = read_table(out / "rotation.csv")
        resid_hz = rotation["nu_hat_hz"] - rotation["table_rate_dps"] / 360.0
        from nvgyro import default_config
        from nvgyro.sequence import combined_sigma
        sigma_nu = combined_sigma(default_config().sequence) / abs(
            report["alpha0_per_hz"]
        )
        assert np.sqrt(np.mean(resid_hz**2)) < 3 * sigma_nu


class TestAllanCommand:
    def test_summary_and_csv(self, tmp_path, fringes_cfg):
        out = tmp_path / "out"
        rc = main(["allan", "--config", str(fringes_cfg), "--out", str(out),
                   "--duration", "60"])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        table = read_table(out / "allan.csv")
        assert np.all(np.diff(table["tau_s"]) > 0)
        # shot-noise-only run: measured ARW tracks the budget prediction
        assert summary["arw_hz_per_rt_hz"] == pytest.approx(
            summary["psn_prediction_hz_per_rt_hz"], rel=0.10
        )
        assert np.allclose(table["adev_dps"], table["adev_hz"] * 360.0)


class TestBudgetCommand:
    def test_report_values(self, capsys):
        assert main(["budget", "--epsilon", "1e-4"]) == 0
        text = capsys.readouterr().out
        assert "mHz/rtHz" in text
        assert "dynamic range" in text
        assert "working point" in text

    def test_budget_json(self, tmp_path):
        out = tmp_path / "out"
        assert main(["budget", "--epsilon", "1e-4", "--out", str(out)]) == 0
        budget = json.loads((out / "budget.json").read_text())
        assert budget["dynamic_range_hz"] == pytest.approx(1.4, rel=0.05)
        assert budget["sensitivity_hz_per_rt_hz"] == pytest.approx(10.0e-3, rel=0.05)
        assert budget["f_dq_hz"] == pytest.approx(293.73e3, rel=1e-4)
        assert json.loads((out / "manifest.json").read_text())["command"] == "budget"
