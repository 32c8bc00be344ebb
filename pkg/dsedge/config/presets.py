"""
Scenario Presets for dsedge
===========================

Canned parameter sets for the standard experiments. ``resolve`` turns a
CLI argument into a config: a preset name or a scenario file path.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Union

from .errors import ConfigError
from .settings import ScenarioConfig

logger = logging.getLogger(__name__)


PRESETS: Dict[str, Dict[str, Any]] = {
    "load_sweep": {
        "description": "Single domain, adaptive WRR, total offered load 0.5 to 3.0 Mbit/s",
        "overrides": {
            "run.scenario_id": "load_sweep",
            "scheduler.mode": "adaptive",
            "sweep.total_loads_bps": [500_000, 1_000_000, 1_500_000, 2_000_000, 2_100_000,
                                      2_400_000, 2_600_000, 3_000_000],
        },
    },
    "shared_link": {
        "description": "Four shaped domains of 2.1 Mbit/s sharing an 8.4 Mbit/s FIFO link",
        "overrides": {
            "run.scenario_id": "shared_link",
            "topology.kind": "multi",
            "topology.domains": 4,
            "topology.shaped": True,
            "sweep.total_loads_bps": [2_000_000, 4_000_000, 6_000_000, 8_400_000],
        },
    },
    "k_sweep": {
        "description": "Static WRR, K from 0.4 to 1.2 over normalized load 0.25 to 1.5",
        "overrides": {
            "run.scenario_id": "k_sweep",
            "scheduler.mode": "static",
            "sweep.k_values": [0.4, 0.6, 0.8, 1.0, 1.2],
            "sweep.normalized_loads": [0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
        },
    },
    "overload": {
        "description": "Overload of 2.6 Mbit/s on a 2.1 Mbit/s link; compare with --mode fifo",
        "overrides": {
            "run.scenario_id": "overload",
            "traffic.be.rate_bps": 1_256_000,
        },
    },
    "testbed": {
        "description": "Fixed transmit and buffer percentages of the reference router map",
        "overrides": {
            "run.scenario_id": "testbed",
            "scheduler.mode": "fixed",
            "scheduler.transmit_percent": {"af": 20.0, "ef": 5.0, "nc": 5.0},
            "buffer.percent": {"af": 40.0, "ef": 10.0, "nc": 5.0},
        },
    },
}

# Names the experiments are also known by.
PRESET_ALIASES: Dict[str, str] = {
    "fig4_4": "load_sweep",
    "fig4_7": "shared_link",
    "fig4_9": "k_sweep",
    "table5_3": "overload",
}


def list_presets() -> List[str]:
    return sorted(PRESETS)


def aliases_of(name: str) -> List[str]:
    return sorted(alias for alias, target in PRESET_ALIASES.items() if target == name)


def is_preset(name: str) -> bool:
    return name in PRESETS or name in PRESET_ALIASES


def describe(name: str) -> str:
    return get_entry(name)["description"]


def get_entry(name: str) -> Dict[str, Any]:
    try:
        return PRESETS[PRESET_ALIASES.get(name, name)]
    except KeyError:
        raise ConfigError("preset", f"unknown preset '{name}', known presets: {', '.join(list_presets())}") from None


def get_preset(name: str) -> ScenarioConfig:
    """Build and validate a preset's config."""
    config = ScenarioConfig().with_overrides(get_entry(name)["overrides"])
    config.validate()
    return config


def resolve(source: Union[str, Path]) -> ScenarioConfig:
    """
    Load ``source`` as a preset name or a scenario file.

    Raises:
        ConfigError: neither a known preset nor an existing file
    """
    text = str(source)
    if is_preset(text):
        logger.debug(f"Using preset {text}")
        return get_preset(text)
    path = Path(text)
    if not path.exists():
        raise ConfigError(
            None,
            f"'{text}' is neither a scenario file nor a preset (known presets: {', '.join(list_presets())})",
        )
    return ScenarioConfig.load_from_file(path)
