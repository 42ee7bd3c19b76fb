import csv
import json
import math
from pathlib import Path

import pytest

from gdsense import Pulse, PulseSequence, validate
from gdsense.cli import main, run
from gdsense.config import ConfigError, load_config

TWO_PI = 2.0 * math.pi
CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

MINIMAL_SCAN = """
[experiment]
kind = "scan"
scheme = "gd_parallel"
seed = 7

[sequence]
n_pulses = 10
n_blocks = 6
pulse_duration_ns = 50.0

[scan]
start_mhz = 0.24
stop_mhz = 0.36
points = 13

[signal]
frame = "lab"

[[signal.parallel_tones]]
amplitude_khz = 24.0
frequency_mhz = 0.3
"""

def write_config(tmp_path, text, name="exp.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path

class TestLoadConfig:
    def test_bundled_mhz_scan_grid(self):
        config = load_config(CONFIG_DIR / "scan_mhz_gd.toml")
        assert config.kind == "scan"
        assert config.scheme == "gd_parallel"
        assert config.scan_grid[0] == pytest.approx(TWO_PI * 0.24e6, rel=1e-12)
        assert config.scan_grid[-1] == pytest.approx(TWO_PI * 0.36e6, rel=1e-12)
        assert len(config.signal.parallel_tones) == 3
        # units normalized once at load: 24 kHz -> 2 pi x 24e3 rad/s
        assert config.signal.parallel_tones[0].amplitude == pytest.approx(
            TWO_PI * 24e3, rel=1e-12
        )
        assert config.params.pulse_duration == pytest.approx(50e-9, rel=1e-12)

    def test_negative_pulse_duration_rejected(self, tmp_path):
        bad = MINIMAL_SCAN.replace("pulse_duration_ns = 50.0", "pulse_duration_ns = -1.0")
        with pytest.raises(ConfigError, match="pulse_duration_ns"):
            load_config(write_config(tmp_path, bad))

    def test_unknown_key_rejected_by_name(self, tmp_path):
        bad = MINIMAL_SCAN.replace("n_blocks = 6", "n_blocks = 6\nrabi_mhz_typo = 10")
        with pytest.raises(ConfigError, match="rabi_mhz_typo"):
            load_config(write_config(tmp_path, bad))

    def test_violation_report_is_complete(self, tmp_path):
        bad = MINIMAL_SCAN.replace("pulse_duration_ns = 50.0", "pulse_duration_ns = -1.0")
        bad = bad.replace("points = 13", "points = 13\nbogus_key = 1")
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, bad))
        message = str(err.value)
        assert "pulse_duration_ns" in message and "bogus_key" in message

    def test_parse_error_reports_location(self, tmp_path):
        with pytest.raises(ConfigError, match="parse error"):
            load_config(write_config(tmp_path, "[experiment\nkind ="))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.toml")

    def test_frame_scheme_mismatch_rejected(self, tmp_path):
        bad = MINIMAL_SCAN.replace('scheme = "gd_parallel"', 'scheme = "gd_perp"')
        with pytest.raises(ConfigError, match="frame"):
            load_config(write_config(tmp_path, bad))

    def test_pulse_overlap_reported_at_load(self, tmp_path):
        bad = MINIMAL_SCAN.replace("pulse_duration_ns = 50.0", "pulse_duration_ns = 400.0")
        with pytest.raises(ConfigError, match="overlap"):
            load_config(write_config(tmp_path, bad))

    def test_sync_samples_snap_to_superperiod(self):
        config = load_config(CONFIG_DIR / "syncread_gd.toml")
        assert config.sync_samples == 140840
        assert config.sync_samples % 10 == 0

class TestRun:
    def test_scan_artifacts_and_summary(self, tmp_path):
        config = load_config(write_config(tmp_path, MINIMAL_SCAN))
        summary = run(config, out_dir=tmp_path / "out")
        assert (tmp_path / "out" / "scan.csv").exists()
        loaded = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert loaded["scheme"] == "gd_parallel"
        assert loaded["fit"]["converged"] is True
        assert summary["n_dips"] == loaded["n_dips"]

    def test_rerun_is_byte_identical(self, tmp_path):
        config = load_config(write_config(tmp_path, MINIMAL_SCAN))
        run(config, out_dir=tmp_path / "a")
        run(config, out_dir=tmp_path / "b")
        for name in ("scan.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_partial_outputs_removed_on_failure(self, tmp_path, monkeypatch):
        config = load_config(write_config(tmp_path, MINIMAL_SCAN))
        import gdsense.cli as cli_module

        def boom(*args, **kwargs):
            raise RuntimeError("simulated failure after artifacts were opened")

        monkeypatch.setattr(cli_module, "fit_lorentzian", boom)
        with pytest.raises(RuntimeError):
            run(config, out_dir=tmp_path / "broken")
        assert not (tmp_path / "broken" / "scan.csv").exists()
        assert not (tmp_path / "broken" / "summary.json").exists()

    def test_dump_sequence_round_trip(self, tmp_path):
        config = load_config(CONFIG_DIR / "dump_sequence_gd.toml")
        run(config, out_dir=tmp_path)
        rows = list(csv.DictReader(open(tmp_path / "sequence.csv")))
        pulses = tuple(
            Pulse(
                float(r["center_s"]),
                float(r["duration_s"]),
                float(r["rabi_rad_s"]),
                float(r["phase_rad"]),
                r["plane"],
            )
            for r in rows
        )
        t_scan = TWO_PI / (TWO_PI * 0.3e6)
        seq = PulseSequence(
            pulses=pulses,
            scheme="gd_parallel",
            scan_frequency=TWO_PI * 0.3e6,
            pulses_per_block=10,
            n_blocks=8,
            block_length=t_scan,
            total_duration=8 * t_scan,
        )
        assert validate(seq) == []

class TestCli:
    def test_subcommand_runs(self, tmp_path, capsys):
        code = main(["scan", str(CONFIG_DIR / "scan_mhz_gd.toml"), "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "dip" in out and "bias" in out

    def test_kind_mismatch_is_config_error(self, tmp_path, capsys):
        code = main(["robustness", str(CONFIG_DIR / "scan_mhz_gd.toml"), "--out", str(tmp_path)])
        assert code == 2

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        bad = write_config(tmp_path, MINIMAL_SCAN.replace("points = 13", "points = 1"))
        code = main(["scan", str(bad), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_seed_override_changes_stochastic_output(self, tmp_path):
        code_a = main(
            ["filter", str(CONFIG_DIR / "filter_mhz_xy.toml"), "--out", str(tmp_path / "a")]
        )
        code_b = main(
            [
                "filter",
                str(CONFIG_DIR / "filter_mhz_xy.toml"),
                "--out",
                str(tmp_path / "b"),
                "--seed",
                "1",
            ]
        )
        assert code_a == 0 and code_b == 0
        # stratified schedule: identical reconstruction regardless of seed
        assert (tmp_path / "a" / "filter.csv").read_bytes() == (
            tmp_path / "b" / "filter.csv"
        ).read_bytes()

    @pytest.mark.parametrize(
        "name",
        sorted(p.name for p in CONFIG_DIR.glob("*.toml")),
    )
    def test_every_bundled_config_runs(self, name, tmp_path):
        config = load_config(CONFIG_DIR / name)
        import time

        start = time.monotonic()
        summary = run(config, out_dir=tmp_path)
        elapsed = time.monotonic() - start
        assert (tmp_path / "summary.json").exists()
        assert elapsed < 300.0
        assert summary["experiment"] == config.kind
