import json

import pandas as pd
import pytest

from app.cli import EXIT_CONFIG, EXIT_OK, EXIT_SINGULAR, build_parser, main
from app.commands import load_run_config
from app.errors import ConfigError


def _run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


class TestLoadRunConfig:
    """Tests for configuration loading and overrides"""

    def test_defaults(self):
        """Test an empty configuration uses device values"""
        config = load_run_config()
        assert config.circuit.omega_c == pytest.approx(6.183)
        assert config.experiment.seed == 1234

    def test_file_and_overrides(self, tmp_path):
        """Test overrides win over the file, and flags win over overrides"""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"circuit": {"g12_ghz": 0.007}, "experiment": {"seed": 5}}))
        config = load_run_config(path, ["experiment.seed=9", "experiment.noisy=true"], seed=11)
        assert config.circuit.g12 == pytest.approx(0.007)
        assert config.experiment.seed == 11
        assert config.experiment.noisy is True

    def test_string_values(self):
        """Test non-JSON override values are taken as strings"""
        config = load_run_config(overrides=["experiment.gate=open"])
        assert config.experiment.gate == "open"

    def test_invalid_value_names_key(self):
        """Test validation errors carry the dotted key"""
        with pytest.raises(ConfigError) as info:
            load_run_config(overrides=["experiment.shots=0"])
        assert info.value.key == "experiment.shots"

    def test_unknown_key(self):
        """Test unknown keys are rejected"""
        with pytest.raises(ConfigError) as info:
            load_run_config(overrides=["circuit.bogus=1"])
        assert info.value.key == "circuit.bogus"

    def test_malformed_override(self):
        """Test an override without '=' is rejected"""
        with pytest.raises(ConfigError):
            load_run_config(overrides=["experiment.seed"])

    def test_missing_file(self, tmp_path):
        """Test an unreadable config file is a configuration error"""
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "missing.json")

    def test_coherence_violation(self):
        """Test T2 > 2 T1 is reported against the circuit block"""
        with pytest.raises(ConfigError) as info:
            load_run_config(overrides=["circuit.t1_q1_ns=100", "circuit.t2_q1_ns=300"])
        assert info.value.key.startswith("circuit")


class TestParser:
    """Tests for the argument parser"""

    def test_noisy_flag(self):
        """Test --noisy works bare and with a value"""
        parser = build_parser()
        assert parser.parse_args(["qpt", "--noisy"]).noisy is True
        assert parser.parse_args(["qpt", "--noisy", "false"]).noisy is False
        assert parser.parse_args(["qpt"]).noisy is None

    def test_repeated_set(self):
        """Test --set may repeat"""
        args = build_parser().parse_args(["chevron", "--set", "a=1", "--set", "b=2"])
        assert args.overrides == ["a=1", "b=2"]

    def test_unknown_command(self):
        """Test unknown subcommands exit with a usage error"""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["bogus"])


class TestCommands:
    """Tests for the subcommands end to end"""

    def test_readout_cal(self, tmp_path):
        """Test readout calibration output and round trip"""
        code = _run(tmp_path, "readout-cal", "--set", "experiment.readout_error_q1=0.05")
        assert code == EXIT_OK
        payload = json.loads((tmp_path / "readout_cal.json").read_text())
        assert payload["round_trip"]["residual"] < 1e-10
        assert len(payload["M"]) == 4

    def test_singular_readout(self, tmp_path):
        """Test a singular readout matrix exits with code 3"""
        code = _run(tmp_path, "readout-cal", "--set", "experiment.readout_error_q1=0.5")
        assert code == EXIT_SINGULAR

    def test_invalid_config(self, tmp_path):
        """Test an invalid value exits with code 2"""
        assert _run(tmp_path, "chevron", "--set", "experiment.shots=-5") == EXIT_CONFIG

    def test_chevron(self, tmp_path):
        """Test the chevron table layout"""
        code = _run(
            tmp_path,
            "chevron",
            "--set", 'experiment.omegac_grid={"values": [6.183]}',
            "--set", 'experiment.t_grid={"start": 0, "stop": 100, "points": 26}',
        )
        assert code == EXIT_OK
        table = pd.read_csv(tmp_path / "chevron.csv")
        assert list(table.columns) == ["omegac_ghz", "t_ns", "p01"]
        assert len(table) == 26
        assert (tmp_path / "chevron_fits.json").exists()

    def test_transistor(self, tmp_path):
        """Test open and closed traces with a summary"""
        assert _run(tmp_path, "transistor") == EXIT_OK
        for gate in ("open", "closed"):
            table = pd.read_csv(tmp_path / f"transistor_{gate}.csv")
            assert list(table.columns) == ["t_ns", "p00", "p01", "p10", "p11"]
        summary = json.loads((tmp_path / "transistor_summary.json").read_text())
        assert summary["open"]["peak_p10"] > summary["closed"]["peak_p10"]

    def test_qpt_with_shots(self, tmp_path):
        """Test shot-based tomography writes chi, bootstrap and records"""
        code = _run(
            tmp_path,
            "qpt",
            "--seed", "3",
            "--set", "experiment.gate=closed",
            "--set", "experiment.shots=2000",
            "--set", "experiment.bootstrap_resamples=4",
            "--set", "experiment.readout_error_q1=0.02",
        )
        assert code == EXIT_OK
        payload = json.loads((tmp_path / "qpt.json").read_text())
        closed = payload["gates"]["closed"]
        assert closed["ideal"] == "identity"
        assert closed["measured_reference"] == pytest.approx(0.9523)
        assert len(closed["chi"]["real"]) == 16
        assert closed["bootstrap"]["resamples"] == 4
        assert 0.0 <= closed["fidelity"] <= closed["fidelity_virtual_z"] + 1e-9
        assert (tmp_path / "qpt_records_closed.jsonl").exists()

    def test_qpt_rerun_is_identical(self, tmp_path):
        """Test a seeded rerun writes byte-identical files"""
        args = (
            "qpt",
            "--seed", "5",
            "--set", "experiment.gate=closed",
            "--set", "experiment.shots=500",
            "--set", "experiment.bootstrap_resamples=2",
        )
        first, second = tmp_path / "first", tmp_path / "second"
        assert _run(first, *args) == EXIT_OK
        assert _run(second, *args) == EXIT_OK
        for name in ("qpt.json", "qpt_records_closed.jsonl"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

        closed = json.loads((first / "qpt.json").read_text())["gates"]["closed"]
        assert set(closed["conditional_phase"]) == {"phase_rad", "z_phases", "fidelity"}
        assert 0.0 <= closed["leakage"]["max"] < 0.01
        assert closed["reference_check"]["margin"] == pytest.approx(0.04)
        assert isinstance(closed["reference_check"]["within"], bool)

    def test_coupling_curve(self, tmp_path):
        """Test both coupler states appear in the coupling curve"""
        code = _run(
            tmp_path,
            "coupling-curve",
            "--set", 'experiment.delta_grid={"values": [-1.564]}',
            "--set", "experiment.curve_window_ns=300",
        )
        assert code == EXIT_OK
        table = pd.read_csv(tmp_path / "coupling_curve.csv")
        assert sorted(table["coupler_state"]) == [0, 1]
        assert list(table.columns) == [
            "delta_ghz", "fitted_2g_mhz", "formula3_2g_mhz", "formula2_2g_mhz", "coupler_state"
        ]

    def test_dephasing_sweep(self, tmp_path):
        """Test the dephasing sweep table"""
        code = _run(tmp_path, "dephasing-sweep", "--set", 'experiment.gamma_grid={"values": [0.0, 0.05]}')
        assert code == EXIT_OK
        table = pd.read_csv(tmp_path / "dephasing_sweep.csv")
        assert list(table.columns) == ["gamma", "peak_p10", "min_p01"]
        assert len(table) == 2
