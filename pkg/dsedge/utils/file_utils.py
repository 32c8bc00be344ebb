"""
File Helpers for dsedge
=======================

Reading scenario files and writing result files.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import yaml

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_scenario_file(filepath: PathLike) -> Dict[str, Any]:
    """
    Load a scenario description from YAML or JSON.

    Returns an empty dict for an empty file.
    """
    path = Path(filepath)
    with path.open("r", encoding="utf-8") as f:
        if path.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(f)
        elif path.suffix == ".json":
            data = json.load(f)
        else:
            raise ValueError("Scenario file must be .yaml, .yml, or .json")

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"Scenario file {path} must contain a mapping at top level")

    logger.debug(f"Loaded scenario file: {path}")
    return data


def write_text(filepath: PathLike, text: str) -> Path:
    """Write text to a file, creating parent directories; OSError names the path."""
    path = Path(filepath)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e.strerror or e}") from e

    logger.info(f"Wrote {path}")
    return path
