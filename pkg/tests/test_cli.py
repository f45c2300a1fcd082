"""Command-line contract: exit codes, output routing, determinism, plots."""

import json
import math
import subprocess
import sys

import pytest

from weakscatter.cli import main
from weakscatter.kinematics import neutron_speed


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def geometry_file(tmp_path):
    path = tmp_path / "geom.cfg"
    path.write_text("l1_m = 11.6\nl2_m = 4.0\ne_i_meV = 90.0\n")
    return path


@pytest.fixture
def events_file(tmp_path):
    v = neutron_speed(90.0)
    times = [11.6 / v + 4.0 / (f * v) for f in (0.7, 0.8, 0.9, 1.1)]
    path = tmp_path / "events.csv"
    path.write_text(
        "t_total_s,theta_rad\n" + "\n".join(f"{t},0.6" for t in times) + "\n"
    )
    return path


class TestExitCodes:
    def test_usage_error_unknown_flag(self, capsys):
        code, _, _ = run_cli(capsys, "mzi", "--r2", "0.75", "--delta", "0.01",
                             "--Delta", "1", "--bogus")
        assert code == 2

    def test_usage_error_bad_value(self, capsys):
        code, _, err = run_cli(capsys, "mzi", "--r2", "1.5", "--delta", "0.0",
                               "--Delta", "1")
        assert code == 2
        assert "r2" in err

    def test_usage_error_missing_subcommand(self, capsys):
        assert main([]) == 2

    def test_data_error_malformed_map(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("K\\E," + ",".join(str(e) for e in range(16)) + "\n"
                       "0.5," + ",".join("1" for _ in range(15)) + ",oops\n"
                       "1.0," + ",".join("1" for _ in range(16)) + "\n"
                       "1.5," + ",".join("1" for _ in range(16)) + "\n"
                       "2.0," + ",".join("1" for _ in range(16)) + "\n")
        code, _, err = run_cli(capsys, "fit", "--map", str(bad))
        assert code == 3
        assert "line 2" in err

    def test_conditioning_error_balanced_dark_port(self, capsys):
        code, _, err = run_cli(capsys, "mzi", "--r2", "0.5", "--delta", "0.001",
                               "--Delta", "1")
        assert code == 4
        assert "dark port" in err

    def test_conditioning_error_flat_fit_input(self, capsys, tmp_path):
        flat = tmp_path / "flat.csv"
        header = "K\\E," + ",".join(str(e) for e in range(16))
        rows = [f"{k}.0," + ",".join("1.0" for _ in range(16)) for k in range(1, 6)]
        flat.write_text(header + "\n" + "\n".join(rows) + "\n")
        code, _, _ = run_cli(capsys, "fit", "--map", str(flat))
        assert code == 4

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        capsys.readouterr()


class TestMziCommand:
    def test_summary_to_stdout_by_default(self, capsys):
        code, out, err = run_cli(capsys, "mzi", "--r2", "0.75", "--delta", "0.01",
                                 "--Delta", "1")
        assert code == 0
        assert out.startswith("mzi:")
        assert "wv_d2=-0.5" in out

    def test_json_document(self, capsys):
        code, out, _ = run_cli(capsys, "mzi", "--r2", "0.75", "--delta", "0.01",
                               "--Delta", "1", "--json")
        assert code == 0
        doc = json.loads(out)
        assert set(doc) == {
            "p_d1", "p_d2", "wv_d1", "wv_d2", "kick_d2_predicted",
            "kick_d2_exact", "total_beam_kick", "classical_kick",
        }
        assert doc["wv_d2"] == -0.5
        assert doc["kick_d2_predicted"] == pytest.approx(-0.005)

    def test_out_file_atomic_and_deterministic(self, capsys, tmp_path):
        target = tmp_path / "report.json"
        args = ("mzi", "--r2", "0.8", "--delta", "0.05", "--Delta", "1",
                "--out", str(target))
        run_cli(capsys, *args)
        first = target.read_bytes()
        run_cli(capsys, *args)
        assert target.read_bytes() == first
        assert not list(tmp_path.glob(".weakscatter-*"))

    def test_sweep_csv(self, capsys):
        code, out, err = run_cli(
            capsys, "mzi", "--r2", "0.75", "--delta", "0.001", "--Delta", "1",
            "--sweep-r2", "0.65,0.85", "--sweep-delta-ratio", "0.01,0.001",
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "r2,delta_over_Delta,p_d2,wv_d2,kick_exact,kick_predicted"
        assert len(lines) == 5
        assert "sweep" in err


class TestWeakvalueCommand:
    def test_projector_weak_value(self, capsys):
        r = math.sqrt(0.75)
        code, out, _ = run_cli(
            capsys, "weakvalue",
            "--operator", "[[0,0],[0,1]]",
            "--pre", json.dumps([f"{r}j", 0.5]),
            "--post", json.dumps([f"-{r}j", 0.5]),
            "--json",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["value_re"] == pytest.approx(-0.5, abs=1e-12)
        assert doc["value_im"] == pytest.approx(0.0, abs=1e-12)

    def test_pointer_shifts_included_with_g(self, capsys):
        code, out, _ = run_cli(
            capsys, "weakvalue",
            "--operator", "[[1,0],[0,-1]]",
            "--pre", "[1, 0]", "--post", "[1, 0]",
            "--g", "0.1", "--json",
        )
        doc = json.loads(out)
        assert doc["pointer_p_shift"] == pytest.approx(0.1)
        assert doc["pointer_q_shift"] == pytest.approx(0.0)

    def test_orthogonal_states_exit_4(self, capsys):
        code, _, _ = run_cli(
            capsys, "weakvalue", "--operator", "[[1,0],[0,0]]",
            "--pre", "[1, 0]", "--post", "[0, 1]",
        )
        assert code == 4

    def test_evolved_variant(self, capsys):
        code, out, _ = run_cli(
            capsys, "weakvalue",
            "--operator", "[[1,0],[0,0]]",
            "--pre", "[0.6, 0.8]", "--post", json.dumps([0.7071, -0.7071]),
            "--u", "[[0,1],[1,0]]", "--json",
        )
        doc = json.loads(out)
        assert doc["value_re"] == pytest.approx(4.0, rel=1e-6)

    def test_bad_matrix_json_is_usage_error(self, capsys):
        code, _, _ = run_cli(capsys, "weakvalue", "--operator", "[[1,0]",
                             "--pre", "[1,0]", "--post", "[1,0]")
        assert code == 2


class TestKinematicsCommand:
    def test_recoil_and_mass(self, capsys):
        code, out, _ = run_cli(capsys, "kinematics", "--k", "2.7", "--e", "14.7",
                               "--mass", "1.0079", "--json")
        doc = json.loads(out)
        assert doc["recoil_energy_meV"] == pytest.approx(15.12, abs=0.01)
        assert doc["effective_mass_amu"] == pytest.approx(1.037, abs=1e-3)
        assert doc["interaction_energy_meV"] == pytest.approx(-0.42, abs=0.01)

    def test_nothing_computable_is_usage_error(self, capsys):
        code, _, _ = run_cli(capsys, "kinematics")
        assert code == 2


class TestTofReduceCommand:
    def test_reduction_to_stdout(self, capsys, geometry_file, events_file):
        code, out, err = run_cli(capsys, "tof-reduce", "--config", str(geometry_file),
                                 "--events", str(events_file))
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "K_invA,E_meV"
        assert len(lines) == 5
        assert "4 events" in err

    def test_explain_lists_sources(self, capsys, geometry_file, events_file):
        code, _, err = run_cli(capsys, "tof-reduce", "--config", str(geometry_file),
                               "--events", str(events_file), "--e-i", "95.0",
                               "--explain")
        assert code == 0
        assert "e_i_meV = 95.0 (flag)" in err
        assert "l1_m = 11.6 (config)" in err
        assert "path_scale = 1.0 (default)" in err

    def test_bad_config_exit_3(self, capsys, tmp_path, events_file):
        bad = tmp_path / "bad.cfg"
        bad.write_text("l1_m=1\nwhat=2\n")
        code, _, err = run_cli(capsys, "tof-reduce", "--config", str(bad),
                               "--events", str(events_file))
        assert code == 3
        assert "line 2" in err

    def test_unphysical_event_exit_3(self, capsys, geometry_file, tmp_path):
        events = tmp_path / "events.csv"
        events.write_text("t_total_s,theta_rad\n1e-9,0.4\n")
        code, _, err = run_cli(capsys, "tof-reduce", "--config", str(geometry_file),
                               "--events", str(events))
        assert code == 3
        assert "line 2" in err


class TestDeficitCommand:
    def test_conventional_limit(self, capsys):
        code, out, _ = run_cli(capsys, "deficit", "--hbarK", "10", "--lambda", "0",
                               "--final", "gaussian", "--json")
        doc = json.loads(out)
        assert doc["total_transfer"] == -10.0
        assert doc["p_w"] == pytest.approx(5.0, abs=1e-8)

    def test_gaussian_correction(self, capsys):
        code, out, _ = run_cli(capsys, "deficit", "--hbarK", "10", "--lambda", "0.2",
                               "--final", "gaussian", "--json")
        doc = json.loads(out)
        assert doc["total_transfer"] == pytest.approx(-9.0, abs=1e-8)
        assert doc["deficit_fraction"] == pytest.approx(0.1, abs=1e-9)
        assert doc["weak_regime"] is True

    def test_delta_final(self, capsys):
        code, out, _ = run_cli(capsys, "deficit", "--hbarK", "6", "--lambda", "0.5",
                               "--final", "delta", "--json")
        doc = json.loads(out)
        assert doc["p_w"] == 6.0
        assert doc["total_transfer"] == -6.0

    def test_csv_final_state(self, capsys, tmp_path):
        from weakscatter.qmcore import GaussianSpec, make_gaussian, save_wavefunction

        path = tmp_path / "final.csv"
        save_wavefunction(make_gaussian(GaussianSpec(2.0, 1.0), -10.0, 12.0, 2048), path)
        code, out, _ = run_cli(capsys, "deficit", "--hbarK", "2", "--lambda", "0.1",
                               "--final", str(path), "--json")
        doc = json.loads(out)
        assert doc["p_w"] == pytest.approx(1.0, abs=1e-6)

    def test_negative_lambda_usage_error(self, capsys):
        code, _, _ = run_cli(capsys, "deficit", "--hbarK", "10", "--lambda", "-1")
        assert code == 2


class TestSynthFitPipeline:
    def test_synth_writes_map_csv(self, capsys, tmp_path):
        target = tmp_path / "map.csv"
        code, out, err = run_cli(capsys, "synth", "--m-eff", "0.64",
                                 "--out", str(target))
        assert code == 0
        assert out == ""
        assert target.read_text().startswith("K\\E,")

    def test_synth_stdout_then_fit(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "synth", "--m-eff", "0.64")
        assert code == 0
        map_path = tmp_path / "map.csv"
        map_path.write_text(out)
        code, fit_out, _ = run_cli(capsys, "fit", "--map", str(map_path))
        assert code == 0
        doc = json.loads(fit_out)
        assert 0.635 <= doc["m_eff_amu"] <= 0.645

    def test_shell_pipeline(self):
        synth = subprocess.run(
            [sys.executable, "-m", "weakscatter", "synth", "--m-eff", "0.64"],
            capture_output=True, text=True, check=True,
        )
        fit = subprocess.run(
            [sys.executable, "-m", "weakscatter", "fit"],
            input=synth.stdout, capture_output=True, text=True, check=True,
        )
        doc = json.loads(fit.stdout)
        assert 0.635 <= doc["m_eff_amu"] <= 0.645

    def test_synth_deterministic_bytes(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for target in (a, b):
            run_cli(capsys, "synth", "--m-eff", "1.2", "--noise", "0.05",
                    "--out", str(target))
        assert a.read_bytes() == b.read_bytes()

    def test_fit_report_fields(self, capsys, tmp_path):
        target = tmp_path / "map.csv"
        run_cli(capsys, "synth", "--m-eff", "1.0079", "--out", str(target))
        out_path = tmp_path / "fit.json"
        code, _, _ = run_cli(capsys, "fit", "--map", str(target),
                             "--out", str(out_path))
        assert code == 0
        doc = json.loads(out_path.read_text())
        assert set(doc) == {"m_eff_amu", "std_err_amu", "e0_meV",
                            "residual_rms_meV", "n_points", "centroids"}

    def test_fit_exclude_k_with_line(self, capsys, tmp_path):
        target = tmp_path / "map.csv"
        run_cli(capsys, "synth", "--m-eff", "0.64", "--a-line", "1.5",
                "--out", str(target))
        code, _, _ = run_cli(capsys, "fit", "--map", str(target))
        capsys.readouterr()
        code, out, _ = run_cli(capsys, "fit", "--map", str(target),
                               "--exclude-k", "2.2:3.2")
        doc = json.loads(out)
        assert doc["m_eff_amu"] == pytest.approx(0.64, rel=0.01)

    def test_synth_ridge_off_grid_exit_4(self, capsys):
        code, _, err = run_cli(capsys, "synth", "--m-eff", "0.05")
        assert code == 4
        assert "ridge" in err


class TestPlotting:
    def test_fit_plot_written(self, capsys, tmp_path):
        map_path = tmp_path / "map.csv"
        run_cli(capsys, "synth", "--m-eff", "0.64", "--a-line", "1.2",
                "--out", str(map_path))
        fig_path = tmp_path / "figure.png"
        code, _, err = run_cli(capsys, "fit", "--map", str(map_path),
                               "--out", str(tmp_path / "fit.json"),
                               "--exclude-k", "2.2:3.2",
                               "--plot-out", str(fig_path))
        assert code == 0
        assert fig_path.exists() and fig_path.stat().st_size > 1000
        assert str(fig_path) in err

    def test_default_figure_next_to_out(self, capsys, tmp_path):
        target = tmp_path / "report.json"
        code, _, _ = run_cli(capsys, "mzi", "--r2", "0.75", "--delta", "0.01",
                             "--Delta", "1", "--out", str(target), "--plot")
        assert code == 0
        assert (tmp_path / "report.png").exists()
