"""
Experiment Runner for dsedge
============================

The orchestrator: turns a scenario into simulated sweep points, with
replications and optional worker processes.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..config.errors import ConfigError
from ..config.settings import ScenarioConfig
from ..engine.random_streams import derive_seeds
from ..engine.simulator import Simulator, seconds_to_us
from .metrics import MetricsLedger, SweepPoint, Verdict, check_requirements
from .network import build_topology
from .traffic import thinning_factor

logger = logging.getLogger(__name__)

K_SWEEP_MODES = ("static", "measured")


@dataclass
class RunResult:
    """Outcome of one replication."""

    ledger: MetricsLedger
    events: int
    trace_digest: Optional[str] = None


def simulate(config: ScenarioConfig, seed: Optional[int] = None, rate_scale: float = 1.0,
             record_trace: bool = False) -> RunResult:
    """
    Build the topology and run it for ``run.duration_s``.

    Conservation is checked at every measurement sample and once more at
    the end of the run.
    """
    seed = config.run.seed if seed is None else seed
    sim = Simulator(record_trace=record_trace)
    ledger = MetricsLedger(domains=config.domains, seed=seed,
                           duration_us=seconds_to_us(config.run.duration_s))
    topology = build_topology(config, sim=sim, ledger=ledger, seed=seed, rate_scale=rate_scale)
    topology.start(sample_interval=int(round(config.run.sample_interval_ms * 1000)))

    events = sim.run_until(seconds_to_us(config.run.duration_s))
    topology.sample(sim.now)

    logger.debug(f"Seed {seed}: {events} events, {len(ledger.samples)} samples")
    return RunResult(ledger=ledger, events=events,
                     trace_digest=sim.trace_digest() if record_trace else None)


def load_plan(config: ScenarioConfig, total_load: float) -> Tuple[float, float]:
    """
    Split a requested total offered load into (BE rate, real-time scale).

    The load is spread evenly over the domains. Below the nominal AF plus
    EF rate, BE is switched off and the real-time sources are thinned.
    """
    per_domain = total_load / config.domains
    realtime = config.realtime_load()
    if per_domain >= realtime:
        return per_domain - realtime, 1.0
    logger.warning(
        f"Requested load {total_load:g} bit/s is below the real-time floor "
        f"{realtime * config.domains:g} bit/s; thinning AF and EF sources"
    )
    return 0.0, thinning_factor(per_domain, realtime)


@dataclass
class PointTask:
    """Everything a worker needs to simulate one sweep point."""

    config: Dict[str, Any]
    rate_scale: float
    seeds: List[int]
    total_offered: float
    label: str = ""


def run_point(task: PointTask) -> MetricsLedger:
    """Run every replication of one point and pool the counts."""
    config = ScenarioConfig.from_dict(task.config)
    pooled: Optional[MetricsLedger] = None
    for seed in task.seeds:
        try:
            result = simulate(config, seed=seed, rate_scale=task.rate_scale)
        except Exception as e:
            logger.error(f"Point {task.label or 'run'} failed at seed {seed}: {e}")
            raise
        if pooled is None:
            pooled = result.ledger
        else:
            pooled.merge(result.ledger)
    pooled.seed = config.run.seed
    return pooled


class ExperimentRunner:
    """
    Main experiment orchestrator for dsedge.

    Runs single scenarios and load or K sweeps. Each point is independent,
    so points can run in worker processes; results come back in task order.
    """

    def __init__(self, config: Optional[ScenarioConfig] = None, jobs: int = 1):
        """
        Initialize the runner.

        Args:
            config: Scenario. If None, uses defaults.
            jobs: Worker processes for sweeps; 1 runs in-process
        """
        self.config = config or ScenarioConfig()
        self.config.validate()
        if jobs < 1:
            raise ConfigError("jobs", f"must be >= 1, got {jobs}")
        self.jobs = jobs
        logger.info(f"Experiment runner ready for '{self.config.run.scenario_id}' ({self.config.scheduler.mode})")

    def _seeds(self, config: ScenarioConfig) -> List[int]:
        return derive_seeds(config.run.seed, config.run.replications)

    def _task(self, config: ScenarioConfig, rate_scale: float, total_offered: float, label: str) -> PointTask:
        return PointTask(config=config.to_dict(), rate_scale=rate_scale, seeds=self._seeds(config),
                         total_offered=total_offered, label=label)

    def _execute(self, tasks: Sequence[PointTask]) -> List[SweepPoint]:
        if self.config.run.duration_s == 0 or not tasks:
            logger.info("Nothing to simulate")
            return []

        if self.jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                ledgers = list(pool.map(run_point, tasks))
        else:
            ledgers = [run_point(t) for t in tasks]

        points = []
        for task, ledger in zip(tasks, ledgers):
            config = ScenarioConfig.from_dict(task.config)
            point = SweepPoint.from_ledger(
                ledger,
                scenario_id=config.run.scenario_id,
                seed=config.run.seed,
                tb_bps=config.capacity(),
                k_factor=config.scheduler.k_factor,
                total_offered_bps=task.total_offered,
            )
            logger.info(f"Point {task.label} done: load {point.normalized_load:g} of capacity")
            points.append(point)
        return points

    def run_scenario(self, config: Optional[ScenarioConfig] = None) -> Optional[SweepPoint]:
        """Simulate one configuration; None when the duration is zero."""
        config = config or self.config
        config.validate()
        points = self._execute([self._task(config, 1.0, config.offered_load(), "run")])
        return points[0] if points else None

    def sweep_load(self, be_rates: Optional[Sequence[float]] = None,
                   total_loads: Optional[Sequence[float]] = None,
                   normalized_loads: Optional[Sequence[float]] = None) -> List[SweepPoint]:
        """
        One point per load, AF and EF held fixed.

        Loads come from the first list given: BE rates, total offered
        loads, or loads normalized to the bottleneck capacity. With none
        given, the config's sweep section is used the same way.
        """
        sweep = self.config.sweep
        if be_rates is None and total_loads is None and normalized_loads is None:
            be_rates = sweep.be_rates or None
            total_loads = sweep.total_loads_bps or None
            normalized_loads = sweep.normalized_loads or None

        tasks: List[PointTask] = []
        if be_rates:
            for rate in be_rates:
                config = self.config.with_overrides({"traffic.be.rate_bps": float(rate)})
                tasks.append(self._task(config, 1.0, config.offered_load(), f"be={rate:g}"))
        elif total_loads or normalized_loads:
            loads = list(total_loads) if total_loads else [n * self.config.capacity() for n in normalized_loads]
            for load in loads:
                tasks.append(self._load_task(self.config, load))
        else:
            raise ConfigError("sweep.be_rates", "no loads to sweep")

        logger.info(f"Load sweep over {len(tasks)} points")
        return self._execute(tasks)

    def _load_task(self, config: ScenarioConfig, load: float) -> PointTask:
        be_rate, scale = load_plan(config, load)
        point_config = config.with_overrides({"traffic.be.rate_bps": be_rate})
        return self._task(point_config, scale, load, f"load={load:g} K={config.scheduler.k_factor:g}")

    def sweep_k(self, k_values: Optional[Sequence[float]] = None,
                normalized_loads: Optional[Sequence[float]] = None) -> List[SweepPoint]:
        """
        One point per (K, load) pair under static scheduling.

        Raises:
            ConfigError: the scheduler is not in a mode that uses K, or K <= 0
        """
        if self.config.scheduler.mode not in K_SWEEP_MODES:
            raise ConfigError(
                "scheduler.mode",
                f"K sweeps need one of {K_SWEEP_MODES}, got '{self.config.scheduler.mode}'",
            )
        k_values = list(k_values or self.config.sweep.k_values)
        if not k_values:
            raise ConfigError("sweep.k_values", "no K values to sweep")
        for k in k_values:
            if k <= 0:
                raise ConfigError("sweep.k_values", f"values must be positive, got {k:g}")

        loads = list(normalized_loads or self.config.sweep.normalized_loads)
        tasks: List[PointTask] = []
        for k in k_values:
            config = self.config.with_overrides({"scheduler.k_factor": float(k)})
            if loads:
                tasks.extend(self._load_task(config, n * config.capacity()) for n in loads)
            else:
                tasks.append(self._task(config, 1.0, config.offered_load(), f"K={k:g}"))

        logger.info(f"K sweep over {len(tasks)} points")
        return self._execute(tasks)

    def check(self, point: SweepPoint) -> List[Verdict]:
        """Judge a point against the configured delay and loss limits."""
        req = self.config.requirements
        return check_requirements(point, req.delay_limits(), req.loss_limits())
