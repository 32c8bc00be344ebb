"""
dsedge - DiffServ Edge Router Simulator
=======================================

Command-line interface for dsedge.
"""

import sys
from typing import Callable, List, Optional

import click
from dotenv import load_dotenv

from . import __version__
from .config.errors import ConfigError
from .config.presets import aliases_of, describe, get_preset, list_presets, resolve
from .config.settings import ScenarioConfig, parse_override
from .core.diffserv import InfeasiblePlanError
from .core.experiment import ExperimentRunner
from .core.metrics import SweepPoint, export_csv, format_csv
from .core.traffic import PROFILES
from .utils.logger import setup_logging

# Load environment variables
load_dotenv()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

MODES = ["adaptive", "static", "fifo", "fixed", "measured"]


def _numbers(value: Optional[str], name: str) -> Optional[List[float]]:
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got '{value}'", param_hint=name)


def scenario_options(func: Callable) -> Callable:
    """Options shared by every simulation command."""
    options = [
        click.argument("config"),
        click.option("--seed", type=int, help="Base random seed"),
        click.option("--out", type=click.Path(dir_okay=False), help="CSV output file (default: stdout)"),
        click.option("--jobs", default=1, show_default=True, type=int, help="Worker processes for sweeps"),
        click.option("--mode", type=click.Choice(MODES), help="Override scheduler.mode"),
        click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override a config key"),
        click.option("--check", is_flag=True, help="Print a requirements PASS/FAIL table to stderr"),
        click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]),
                     help="Log level (default: DSEDGE_LOG_LEVEL or WARNING)"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _load(config: str, seed: Optional[int], mode: Optional[str], overrides) -> ScenarioConfig:
    scenario = resolve(config)
    updates = dict(parse_override(o) for o in overrides)
    if mode:
        updates["scheduler.mode"] = mode
    if seed is not None:
        updates["run.seed"] = seed
    if updates:
        scenario = scenario.with_overrides(updates)
    scenario.validate()
    return scenario


def _emit(points: List[SweepPoint], out: Optional[str]):
    if out:
        export_csv(points, out)
        click.echo(f"Wrote {len(points)} point(s) to {out}", err=True)
    else:
        click.echo(format_csv(points), nl=False)


def _report(runner: ExperimentRunner, points: List[SweepPoint]):
    failed = 0
    for point in points:
        click.echo(f"Requirements at {point.total_offered_bps:g} bit/s, K={point.k_factor:g}:", err=True)
        for verdict in runner.check(point):
            click.echo(f"  {verdict}", err=True)
            failed += not verdict.passed
    click.echo(f"{failed} requirement(s) failed", err=True)


def _guarded(action: Callable[[], None]):
    """Run a command body and map failures to exit codes."""
    try:
        action()
    except ConfigError as e:
        click.echo(f"[CONFIG ERROR] {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except InfeasiblePlanError as e:
        click.echo(f"[INFEASIBLE] {e}", err=True)
        sys.exit(EXIT_INFEASIBLE)
    except click.ClickException:
        raise
    except Exception as e:
        click.echo(f"[FAILED] {type(e).__name__}: {e}", err=True)
        sys.exit(EXIT_FAILURE)


@click.group()
@click.version_option(version=__version__)
def cli():
    """
    dsedge - DiffServ edge router QoS simulator

    Simulate adaptive and static WRR scheduling on a constrained link
    and write per-class loss and delay as CSV.
    """
    pass


@cli.command()
@scenario_options
def run(config, seed, out, jobs, mode, overrides, check, log_level):
    """
    Run one scenario (file or preset name).

    Example:
        dsedge run overload --mode fifo
    """

    def action():
        setup_logging(level=log_level)
        scenario = _load(config, seed, mode, overrides)
        runner = ExperimentRunner(scenario, jobs=jobs)
        point = runner.run_scenario()
        points = [point] if point is not None else []
        _emit(points, out)
        if check:
            _report(runner, points)

    _guarded(action)


@cli.command("sweep-load")
@scenario_options
@click.option("--rates", help="Comma-separated BE rates in bit/s")
@click.option("--loads", help="Comma-separated total offered loads in bit/s")
def sweep_load(config, seed, out, jobs, mode, overrides, check, log_level, rates, loads):
    """
    Sweep the offered load with AF and EF held fixed.

    Example:
        dsedge sweep-load load_sweep --loads 500000,2100000,3000000
    """

    def action():
        setup_logging(level=log_level)
        scenario = _load(config, seed, mode, overrides)
        runner = ExperimentRunner(scenario, jobs=jobs)
        be_rates = _numbers(rates, "--rates")
        total_loads = _numbers(loads, "--loads")
        if be_rates is None and total_loads is None:
            points = runner.sweep_load()
        else:
            points = runner.sweep_load(be_rates=be_rates, total_loads=total_loads)
        _emit(points, out)
        if check:
            _report(runner, points)

    _guarded(action)


@cli.command("sweep-k")
@scenario_options
@click.option("--k", "k_values", help="Comma-separated K values")
@click.option("--loads", help="Comma-separated normalized loads")
def sweep_k(config, seed, out, jobs, mode, overrides, check, log_level, k_values, loads):
    """
    Sweep the AF tuning factor K under static scheduling.

    Example:
        dsedge sweep-k k_sweep --k 0.4,1.0 --loads 0.5,1.0
    """

    def action():
        setup_logging(level=log_level)
        scenario = _load(config, seed, mode, overrides)
        runner = ExperimentRunner(scenario, jobs=jobs)
        points = runner.sweep_k(_numbers(k_values, "--k"), _numbers(loads, "--loads"))
        _emit(points, out)
        if check:
            _report(runner, points)

    _guarded(action)


@cli.group()
def presets():
    """
    Built-in scenario presets.
    """
    pass


@presets.command("list")
def presets_list():
    """List preset names."""
    for name in list_presets():
        aliases = aliases_of(name)
        also = f" (also {', '.join(aliases)})" if aliases else ""
        click.echo(f"{name:12s} {describe(name)}{also}")


@presets.command("show")
@click.argument("name")
def presets_show(name):
    """Print a preset as YAML."""
    _guarded(lambda: click.echo(get_preset(name).dump_yaml(), nl=False))


@cli.command()
def info():
    """
    Show system information.
    """

    click.echo("dsedge - DiffServ edge router simulator")
    click.echo("=" * 50)
    click.echo(f"Version: {__version__}")
    click.echo(f"Python: {sys.version.split()[0]}")

    click.echo("\nDependencies:")
    try:
        import numpy

        click.echo(f"  [OK] numpy: {numpy.__version__}")
    except ImportError:
        click.echo("  [ERROR] numpy: Not installed")
    try:
        import yaml

        click.echo(f"  [OK] PyYAML: {yaml.__version__}")
    except ImportError:
        click.echo("  [ERROR] PyYAML: Not installed")

    click.echo("\nCodec profiles:")
    for p in PROFILES.values():
        click.echo(f"  {p.name:11s} {p.kind:5s} avg {p.avg_rate:>9,.0f} bit/s  peak {p.peak_rate:>9,.0f} bit/s  {p.pkt_size} B")

    click.echo(f"\nPresets: {', '.join(list_presets())}")


if __name__ == "__main__":
    cli()
