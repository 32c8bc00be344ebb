"""
Tests for the Command-Line Interface
====================================
"""

from unittest.mock import patch

import pytest
from click.testing import CliRunner

from dsedge import __version__
from dsedge.cli import cli
from dsedge.core.metrics import CSV_COLUMNS, read_csv

HEADER = ",".join(CSV_COLUMNS)
SHORT = ["--set", "run.duration_s=2", "--set", "run.warmup_s=0.5", "--set", "run.replications=1"]


@pytest.fixture
def runner():
    return CliRunner()


class TestRun:
    """Test suite for ``dsedge run``."""

    def test_run_to_file(self, runner, tmp_path):
        out = tmp_path / "run.csv"
        result = runner.invoke(cli, ["run", "overload", *SHORT, "--out", str(out)])
        assert result.exit_code == 0, result.output
        points = read_csv(out)
        assert len(points) == 1
        assert points[0].scenario_id == "overload"
        assert points[0].total_offered_bps == 2_600_000
        assert [r.cls.value for r in points[0].results] == ["AF", "EF", "BE"]

    def test_run_to_stdout(self, runner, scenario_file):
        result = runner.invoke(cli, ["run", str(scenario_file)])
        assert result.exit_code == 0, result.output
        assert HEADER in result.output
        assert "file_test" in result.output

    def test_zero_duration_writes_header_only(self, runner, tmp_path):
        out = tmp_path / "empty.csv"
        result = runner.invoke(cli, ["run", "overload", "--set", "run.duration_s=0", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert out.read_text(encoding="utf-8") == HEADER + "\n"

    def test_mode_and_seed_override(self, runner, tmp_path):
        out = tmp_path / "fifo.csv"
        result = runner.invoke(cli, ["run", "overload", *SHORT, "--mode", "fifo", "--seed", "9",
                                     "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert read_csv(out)[0].seed == 9

    def test_check_table(self, runner, tmp_path):
        result = runner.invoke(cli, ["run", "overload", *SHORT, "--check", "--out", str(tmp_path / "c.csv")])
        assert result.exit_code == 0, result.output
        assert "requirement(s) failed" in result.output
        assert "AF/d0 loss_pct" in result.output


class TestExitCodes:
    """Test suite for error handling."""

    def test_unknown_key(self, runner):
        result = runner.invoke(cli, ["run", "overload", "--set", "run.nope=1"])
        assert result.exit_code == 2
        assert "run.nope" in result.output

    def test_invalid_value(self, runner):
        result = runner.invoke(cli, ["run", "overload", "--set", "link.bottleneck_bps=100"])
        assert result.exit_code == 2
        assert "link.bottleneck_bps" in result.output

    def test_unknown_source(self, runner):
        result = runner.invoke(cli, ["run", "no_such_preset"])
        assert result.exit_code == 2

    def test_infeasible(self, runner):
        result = runner.invoke(cli, ["run", "overload", *SHORT, "--set", "traffic.af.sessions=8"])
        assert result.exit_code == 3
        assert "AF sessions fit" in result.output

    def test_unexpected_failure(self, runner):
        with patch("dsedge.cli.ExperimentRunner.run_scenario", side_effect=RuntimeError("boom")):
            result = runner.invoke(cli, ["run", "overload", *SHORT])
        assert result.exit_code == 1
        assert "boom" in result.output

    def test_bad_number_list(self, runner):
        result = runner.invoke(cli, ["sweep-load", "load_sweep", "--loads", "1e6,abc"])
        assert result.exit_code == 2


class TestSweeps:
    """Test suite for sweep commands."""

    def test_sweep_load(self, runner, tmp_path):
        out = tmp_path / "load.csv"
        result = runner.invoke(cli, ["sweep-load", "load_sweep", *SHORT, "--loads", "2600000,1500000",
                                     "--out", str(out)])
        assert result.exit_code == 0, result.output
        points = read_csv(out)
        assert [p.total_offered_bps for p in points] == [1_500_000, 2_600_000]

    def test_sweep_be_rates(self, runner, tmp_path):
        out = tmp_path / "rates.csv"
        result = runner.invoke(cli, ["sweep-load", "overload", *SHORT,
                                     "--rates", "0", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert read_csv(out)[0].total_offered_bps == 1_344_000

    def test_sweep_k(self, runner, tmp_path):
        out = tmp_path / "k.csv"
        result = runner.invoke(cli, ["sweep-k", "k_sweep", *SHORT, "--k", "0.6,1.0", "--loads", "1.0",
                                     "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert [p.k_factor for p in read_csv(out)] == [0.6, 1.0]

    def test_sweep_k_wrong_mode(self, runner):
        result = runner.invoke(cli, ["sweep-k", "load_sweep", *SHORT, "--k", "1.0", "--loads", "1.0"])
        assert result.exit_code == 2
        assert "scheduler.mode" in result.output


class TestInfoCommands:
    """Test suite for presets, info and version."""

    def test_presets_list(self, runner):
        result = runner.invoke(cli, ["presets", "list"])
        assert result.exit_code == 0
        for name in ("load_sweep", "shared_link", "k_sweep", "overload", "testbed"):
            assert name in result.output
        assert "(also fig4_4)" in result.output
        assert "(also table5_3)" in result.output

    def test_presets_show(self, runner):
        result = runner.invoke(cli, ["presets", "show", "shared_link"])
        assert result.exit_code == 0
        assert "domains: 4" in result.output

    def test_presets_show_alias(self, runner):
        result = runner.invoke(cli, ["presets", "show", "fig4_7"])
        assert result.exit_code == 0
        assert "scenario_id: shared_link" in result.output

    def test_presets_show_unknown(self, runner):
        result = runner.invoke(cli, ["presets", "show", "nope"])
        assert result.exit_code == 2

    def test_info(self, runner):
        result = runner.invoke(cli, ["info"])
        assert result.exit_code == 0
        assert "H263" in result.output
        assert "numpy" in result.output

    def test_version(self, runner):
        result = runner.invoke(cli, ["--version"])
        assert __version__ in result.output
