"""
Pytest Configuration and Fixtures for dsedge Tests
==================================================
"""

import sys
from pathlib import Path

import pytest

# Add dsedge to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from dsedge.config.settings import ScenarioConfig
from dsedge.core.metrics import MetricsLedger
from dsedge.engine.random_streams import RandomStream
from dsedge.engine.simulator import Simulator


@pytest.fixture
def sim():
    """Provide a fresh simulator."""
    return Simulator()


@pytest.fixture
def traced_sim():
    """Provide a simulator that records its event trace."""
    return Simulator(record_trace=True)


@pytest.fixture
def stream():
    """Provide a seeded random stream."""
    return RandomStream(42, "test.0")


@pytest.fixture
def ledger():
    """Provide an empty single-domain metrics ledger."""
    return MetricsLedger(domains=1, seed=1, duration_us=10_000_000)


@pytest.fixture
def default_config():
    """Provide the default scenario (2.1 Mbit/s, nominal load)."""
    return ScenarioConfig()


@pytest.fixture
def quick_config():
    """Provide a short single-replication scenario for end-to-end tests."""
    return ScenarioConfig.from_dict({
        "run": {"duration_s": 6, "warmup_s": 1, "replications": 1, "seed": 3, "scenario_id": "quick"},
    })


@pytest.fixture
def scenario_file(tmp_path):
    """Write a small YAML scenario and return its path."""
    path = tmp_path / "scenario.yaml"
    path.write_text(
        "run:\n"
        "  scenario_id: file_test\n"
        "  duration_s: 3\n"
        "  warmup_s: 0.5\n"
        "  replications: 1\n"
        "traffic.be.rate_bps: 500000\n",
        encoding="utf-8",
    )
    return path
