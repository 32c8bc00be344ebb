"""
Quick Start Script for dsedge
=============================

Run this to see what QoS scheduling does under overload.
"""

import os
import sys

from dotenv import load_dotenv

# Add dsedge to path
sys.path.insert(0, os.path.dirname(__file__))

from dsedge.config.errors import ConfigError
from dsedge.config.presets import get_preset
from dsedge.core.diffserv import TrafficClass
from dsedge.core.experiment import ExperimentRunner
from dsedge.utils.logger import setup_logging

DEMO = {"run.duration_s": 20, "run.warmup_s": 2, "run.replications": 1}


def _fmt(value):
    return "-" if value is None else f"{value:8.2f}"


def main():
    """Run the overload scenario with and without QoS."""

    print("=" * 60)
    print("  dsedge - DiffServ Edge Router Simulator")
    print("=" * 60)
    print()

    load_dotenv()
    setup_logging()

    base = get_preset("overload").with_overrides(DEMO)
    print(f"Offered {base.offered_load() / 1e6:.2f} Mbit/s on a {base.capacity() / 1e6:.2f} Mbit/s link")
    print(f"Simulating {base.run.duration_s:g} s per mode...")
    print()

    print(f"{'mode':10s} {'class':5s} {'loss %':>8s} {'delay ms':>8s}")
    try:
        for mode in ("adaptive", "fifo"):
            runner = ExperimentRunner(base.with_overrides({"scheduler.mode": mode}))
            point = runner.run_scenario()
            for cls in (TrafficClass.AF, TrafficClass.EF, TrafficClass.BE):
                print(f"{mode:10s} {cls.value:5s} {_fmt(point.loss(cls))} {_fmt(point.mean_delay(cls))}")
    except KeyboardInterrupt:
        print("\n[WARN] Simulation interrupted by user")
    except ConfigError as e:
        print(f"\n[ERROR] Configuration: {e}")

    print()
    print("=" * 60)
    print("Next steps:")
    print("  1. Check the scenarios in dsedge/examples/")
    print("  2. Run: dsedge presets list")
    print("  3. Run: dsedge sweep-load load_sweep --out sweep.csv")
    print("=" * 60)


if __name__ == "__main__":
    main()
