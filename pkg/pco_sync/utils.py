"""Utility functions for pco_sync."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np
import yaml

TWO_PI = 2.0 * math.pi


def wrap_phase(x: Any) -> Any:
    """Reduce angles into [-pi, pi].

    Angles already inside the interval are returned unchanged, and the
    reduction is odd: wrap_phase(-x) == -wrap_phase(x) exactly.
    """
    return x - TWO_PI * np.round(np.asarray(x, dtype=float) / TWO_PI)


def to_unit_circle(x: Any) -> Any:
    """Reduce angles into [0, 2*pi)."""
    return np.mod(np.asarray(x, dtype=float), TWO_PI)


def circular_distance(a: Any, b: Any) -> Any:
    """Absolute angular distance between two phases, in [0, pi]."""
    return np.abs(wrap_phase(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def to_jsonable(value: Any) -> Any:
    """Convert numpy containers and scalars into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            return None
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def ensure_output_dir(output_dir: Path) -> Path:
    """Ensure the output directory exists."""
    output_dir.mkdir(parents=True, exist_ok=True)
    return output_dir


def save_json(data: Any, filepath: Path) -> None:
    """Save data to a JSON file."""
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(data), f, indent=2, ensure_ascii=False)
        f.write("\n")


def save_text(text: str, filepath: Path) -> None:
    """Save text to a file."""
    with open(filepath, "w", encoding="utf-8") as f:
        f.write(text)


def load_document(filepath: Path) -> dict[str, Any]:
    """Load a YAML or JSON configuration document.

    YAML is a superset of JSON, so both formats go through yaml.safe_load.

    Raises:
        ValueError: If the document is empty or not a mapping
    """
    with open(filepath, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    if not isinstance(data, dict):
        raise ValueError(f"{filepath}: expected a mapping at the top level")
    return data
