"""Stored calibration table: measured constants for the constant-parameterized bounds."""
from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

from .errors import InvalidInput

SCHEMA = "calibration/v1"


def _default_path() -> Path:
    return Path(str(resources.files("arakcf") / "data" / "calibration.json"))


def load_calibration(path: str | Path | None = None) -> dict:
    """Load a calibration table; a missing default file gives an empty table."""
    p = Path(path) if path is not None else _default_path()
    if not p.exists():
        if path is not None:
            raise InvalidInput(f"calibration file {p} not found")
        return {"schema": SCHEMA, "identities": {}}
    obj = json.loads(p.read_text())
    if obj.get("schema") != SCHEMA:
        raise InvalidInput(f"{p} is not a {SCHEMA} table")
    return obj


def save_calibration(table: dict, path: str | Path | None = None) -> Path:
    p = Path(path) if path is not None else _default_path()
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    return p


def constant(name: str, default: float = 1.0, table: dict | None = None) -> float:
    """Max observed lhs/rhs ratio for ``name``, or ``default`` when unknown."""
    table = load_calibration() if table is None else table
    entry = table.get("identities", {}).get(name)
    if not entry:
        return default
    val = entry.get("max")
    if val is None or not math.isfinite(val) or val <= 0:
        return default
    return float(val)
