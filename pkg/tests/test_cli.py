"""Config and CLI tests.

Runs invoke cli.main in process with tmp_path artifact directories, so
exit codes, emitted files, and byte-reproducibility are all checked
against the real entry point without subprocess overhead.
"""

import json
import math
import pathlib
import subprocess
import sys
from dataclasses import fields

import numpy as np
import pytest
import yaml

from ionlc import cli
from ionlc.config import (
    DEVICE_KEYS,
    MODES,
    ConfigError,
    RunConfig,
    config_from_mapping,
    device_params,
    load_config,
    require_mode,
)
from ionlc.device import DeviceParams


def write_config(tmp_path, mapping):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(mapping))
    return path


class TestConfigParsing:
    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(path) == RunConfig()

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown config key 'modee'"):
            config_from_mapping({"modee": "params"})

    def test_unknown_nested_key_names_full_path(self):
        with pytest.raises(ConfigError, match="sweep.workerz"):
            config_from_mapping({"sweep": {"workerz": 2}})
        with pytest.raises(ConfigError, match="protocol.ms.loops"):
            config_from_mapping({"protocol": {"ms": {"loops": 2}}})

    def test_device_keys_map_onto_device_params(self):
        # the config schema must reference only real DeviceParams names
        param_names = {f.name for f in fields(DeviceParams)}
        for target, _scale in DEVICE_KEYS.values():
            assert target in param_names

    def test_unknown_device_key(self):
        with pytest.raises(ConfigError, match="device.omega_trap_hz"):
            config_from_mapping({"device": {"omega_trap_hz": 1e6}})

    def test_hz_conversion_happens_once_at_use(self):
        cfg = config_from_mapping({"device": {"omega_i_hz": 2.0e6}})
        # stored exactly as written
        assert dict(cfg.device)["omega_i_hz"] == 2.0e6
        p = device_params(cfg)
        assert p.omega_i == pytest.approx(2 * math.pi * 2.0e6, rel=1e-15)

    def test_invalid_device_value_is_config_error(self):
        cfg = config_from_mapping({"device": {"eta": 1.5}})
        with pytest.raises(ConfigError, match="eta"):
            device_params(cfg)

    def test_type_validation(self):
        with pytest.raises(ConfigError, match="simulate.n_samples"):
            config_from_mapping({"simulate": {"n_samples": True}})
        with pytest.raises(ConfigError, match="simulate.tolerance"):
            config_from_mapping({"simulate": {"tolerance": 1e-2}})
        with pytest.raises(ConfigError, match="sweep.values\\[1\\]"):
            config_from_mapping({"sweep": {"values": [1.0, "x"]}})
        with pytest.raises(ConfigError, match="must be finite"):
            config_from_mapping({"sweep": {"values": [1.0, math.inf]}})
        with pytest.raises(ConfigError, match="dims"):
            config_from_mapping({"simulate": {"dims": [8, 1]}})
        with pytest.raises(ConfigError, match="dims"):
            config_from_mapping({"simulate": {"dims": [8, 8, 8]}})
        with pytest.raises(ConfigError, match="protocol.name"):
            config_from_mapping({"protocol": {"name": "teleport"}})
        with pytest.raises(ConfigError, match="sweep.axis"):
            config_from_mapping({"sweep": {"axis": "eta"}})

    def test_round_trip_identity(self, tmp_path):
        mapping = {
            "mode": "sweep",
            "seed": 11,
            "device": {"omega_i_hz": 1.1e6, "eta": 0.25},
            "sweep": {"values": [2.5, 5.0], "workers": 2},
            "protocol": {"name": "ms", "ms": {"delta_hz": 4.0}},
        }
        cfg = load_config(write_config(tmp_path, mapping))
        echoed = cfg.to_mapping()
        assert config_from_mapping(echoed) == cfg
        # and the echo survives a YAML round trip byte-for-byte in values
        again = yaml.safe_load(yaml.safe_dump(echoed))
        assert config_from_mapping(again) == cfg

    def test_malformed_yaml_is_config_error(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("mode: [unclosed\n")
        with pytest.raises(ConfigError, match="parse error"):
            load_config(path)

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.yaml")


class TestRequireMode:
    def test_fills_unset_mode(self):
        cfg = require_mode(RunConfig(), "params")
        assert cfg.mode == "params"

    def test_rejects_mismatch(self):
        cfg = config_from_mapping({"mode": "sweep", "sweep": {"values": [1.0]}})
        with pytest.raises(ConfigError, match="subcommand"):
            require_mode(cfg, "simulate")

    def test_empty_sweep_values_rejected(self):
        with pytest.raises(ConfigError, match="sweep.values"):
            require_mode(RunConfig(), "sweep")

    def test_run_requires_mode(self, tmp_path):
        with pytest.raises(ConfigError, match="mode"):
            cli.run(RunConfig(), out_dir=tmp_path)


def read_summary(out_dir):
    return json.loads((out_dir / "summary.json").read_text())


def read_csv(path):
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return header, rows


class TestParamsMode:
    def test_reference_design_summary(self, tmp_path, capsys):
        assert cli.main(["params", "--out", str(tmp_path)]) == 0
        s = read_summary(tmp_path)
        g0 = s["results"]["g0"]
        assert 2 * math.pi * 160e3 < g0 < 2 * math.pi * 210e3
        assert s["convergence"]["delta"] == 0.0
        assert s["error"] is None
        assert "summary.json" in capsys.readouterr().out

    def test_seed_echoed(self, tmp_path):
        cfg = write_config(tmp_path, {"mode": "params", "seed": 42})
        out = tmp_path / "run"
        assert cli.main(["params", "--config", str(cfg), "--out", str(out)]) == 0
        assert read_summary(out)["config"]["seed"] == 42

    def test_device_override_flows_through(self, tmp_path):
        cfg = write_config(
            tmp_path, {"mode": "params", "device": {"omega_i_hz": 2.0e6}}
        )
        out = tmp_path / "run"
        assert cli.main(["params", "--config", str(cfg), "--out", str(out)]) == 0
        s = read_summary(out)
        assert s["results"]["omega_i"] == pytest.approx(2 * math.pi * 2e6)
        # z0 scales as 1/sqrt(omega_i): doubling the trap shrinks it
        assert s["results"]["z0"] == pytest.approx(24e-9 / math.sqrt(2), rel=0.03)


@pytest.fixture(scope="module")
def sim_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    cfg = out / "config.yaml"
    cfg.write_text(
        yaml.safe_dump(
            {"mode": "simulate", "simulate": {"dims": [6, 6], "n_samples": 41}}
        )
    )
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    return out


class TestSimulateMode:
    def test_series_schema(self, sim_out):
        header, rows = read_csv(sim_out / "series.csv")
        assert header == ["time", "P_lc", "P_motion", "norm"]
        assert rows.shape == (41, 4)
        assert rows[0, 1] == pytest.approx(1.0, abs=1e-12)  # photon starts on LC
        assert rows[-1, 2] == pytest.approx(1.0, abs=1e-6)  # and ends on motion
        # excitation number is conserved by the beam splitter
        assert np.max(np.abs(rows[:, 1] + rows[:, 2] - 1.0)) < 1e-6
        assert np.max(np.abs(rows[:, 3] - 1.0)) < 1e-6

    def test_summary_contents(self, sim_out):
        s = read_summary(sim_out)
        assert s["results"]["transfer_probability"] > 1 - 1e-6
        assert s["invariants"]["norm_preserved"]["ok"]
        assert s["convergence"]["ok"]

    def test_byte_reproducible(self, sim_out, tmp_path):
        cfg = sim_out / "config.yaml"
        assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "series.csv").read_bytes() == (
            sim_out / "series.csv"
        ).read_bytes()
        assert (tmp_path / "summary.json").read_bytes() == (
            sim_out / "summary.json"
        ).read_bytes()


class TestProtocolMode:
    def test_budget_zero_rates(self, tmp_path):
        cfg = write_config(
            tmp_path,
            {
                "mode": "protocol",
                "protocol": {
                    "name": "budget",
                    "budget": {
                        "kappa_lc_per_s": 0.0,
                        "gamma_heat_per_s": 0.0,
                        "convergence": False,
                    },
                },
            },
        )
        out = tmp_path / "run"
        assert cli.main(["protocol", "--config", str(cfg), "--out", str(out)]) == 0
        s = read_summary(out)
        assert s["results"]["process_infidelity"] < 1e-3
        assert s["invariants"]["entanglement_fidelity_real"]["ok"]

    def test_cat_emits_parity_series(self, tmp_path):
        cfg = write_config(
            tmp_path,
            {
                "mode": "protocol",
                "protocol": {"name": "cat", "cat": {"lc_dim": 32, "n_points": 21}},
            },
        )
        out = tmp_path / "run"
        assert cli.main(["protocol", "--config", str(cfg), "--out", str(out)]) == 0
        header, rows = read_csv(out / "series.csv")
        assert header == ["epsilon", "parity"]
        assert rows.shape == (21, 2)
        s = read_summary(out)
        assert s["results"]["enhancement"] > 1.0
        assert s["convergence"]["ok"]

    def test_two_ion_summary(self, tmp_path):
        cfg = write_config(
            tmp_path,
            {
                "mode": "protocol",
                "protocol": {"name": "two_ion", "two_ion": {"lc_dim": 16}},
            },
        )
        out = tmp_path / "run"
        assert cli.main(["protocol", "--config", str(cfg), "--out", str(out)]) == 0
        s = read_summary(out)
        assert abs(abs(s["results"]["sector_phase"]) - math.pi) < 1e-3
        assert s["results"]["vacuum_return"] > 1 - 1e-6

    def test_numerical_failure_exit_3_with_diagnostic(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            {
                "mode": "protocol",
                "protocol": {
                    "name": "ms",
                    "ms": {"delta_hz": 1.0, "dims": [2, 3, 3], "convergence": False},
                },
            },
        )
        out = tmp_path / "run"
        assert cli.main(["protocol", "--config", str(cfg), "--out", str(out)]) == 3
        s = read_summary(out)
        assert "failed to close" in s["error"]
        assert "numerical failure" in capsys.readouterr().err


@pytest.fixture(scope="module")
def sweep_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    cfg = out / "config.yaml"
    cfg.write_text(
        yaml.safe_dump(
            {
                "mode": "sweep",
                "sweep": {
                    "values": [2.5, 5.0, 10.0],
                    "gamma_heat_per_s": 0.0,
                    "dims": [2, 6, 8],
                },
            }
        )
    )
    code = cli.main(
        ["sweep", "--config", str(cfg), "--out", str(out), "--workers", "3"]
    )
    assert code == 0
    return out


class TestSweepMode:
    def test_one_row_per_point_with_required_columns(self, sweep_out):
        header, rows = read_csv(sweep_out / "sweep.csv")
        assert header[:4] == ["delta", "infidelity", "n_loops", "alpha"]
        assert rows.shape[0] == 3
        # aggregation ordered by sweep index regardless of worker count
        assert list(rows[:, 0]) == sorted(rows[:, 0])
        assert rows[:, 0] == pytest.approx(
            [2 * math.pi * 2.5, 2 * math.pi * 5.0, 2 * math.pi * 10.0]
        )
        assert list(rows[:, 2]) == [1.0, 4.0, 16.0]

    def test_summary_and_convergence(self, sweep_out):
        s = read_summary(sweep_out)
        assert s["invariants"]["alpha_held_fixed"]["ok"]
        assert s["convergence"]["ok"]
        assert s["results"]["n_points"] == 3
        assert s["results"]["workers"] == 3

    def test_empty_values_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"mode": "sweep", "sweep": {"values": []}})
        assert cli.main(["sweep", "--config", str(cfg)]) == 2
        assert "sweep.values" in capsys.readouterr().err

    def test_unknown_key_exit_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("device:\n  omega_trap_hz: 1.0e6\n")
        assert cli.main(["params", "--config", str(cfg)]) == 2
        assert "omega_trap_hz" in capsys.readouterr().err


class TestCheckMode:
    def test_quick_suite_passes(self, tmp_path, capsys):
        assert cli.main(["check", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") >= 7
        assert "FAIL" not in out
        s = read_summary(tmp_path)
        assert s["results"]["all_ok"]
        assert all(v["ok"] for v in s["invariants"].values())
        assert s["convergence"]["ok"]


def test_console_script_help():
    proc = subprocess.run(
        [sys.executable, "-m", "ionlc.cli", "--help"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    for name in ("params", "simulate", "protocol", "sweep", "check"):
        assert name in proc.stdout


class TestShippedExamples:
    """The configs/ directory must stay parseable against the live schema."""

    EXAMPLES = sorted((pathlib.Path(__file__).parents[1] / "configs").glob("*.yaml"))

    def test_examples_present(self):
        names = {p.name for p in self.EXAMPLES}
        assert {"params.yaml", "swap.yaml", "budget.yaml", "heating_sweep.yaml"} <= names

    @pytest.mark.parametrize("path", EXAMPLES, ids=lambda p: p.name)
    def test_example_parses_and_matches_mode(self, path):
        cfg = load_config(path)
        assert cfg.mode in MODES
        # require_mode re-validates mode-specific invariants (nonempty sweep)
        require_mode(cfg, cfg.mode)

    def test_params_example_runs(self, tmp_path):
        assert cli.main(
            ["params", "--config", str(self.EXAMPLES[0].parent / "params.yaml"),
             "--out", str(tmp_path)]
        ) == 0
