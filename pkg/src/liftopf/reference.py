"""Stored AC OPF solutions for the bundled cases (objective and voltage profile)."""
from __future__ import annotations

import cmath
import json
import math
from functools import lru_cache
from pathlib import Path

_PATH = Path(__file__).parent / "data" / "reference_opf.json"


@lru_cache(maxsize=1)
def _table() -> dict:
    return json.loads(_PATH.read_text())


def reference_objective(name: str) -> float | None:
    entry = _table()["cases"].get(name)
    return None if entry is None else float(entry["objective"])


def reference_voltages(name: str) -> dict[int, complex]:
    """Bus voltages of the stored solution, keyed by bus id."""
    prof = _table()["cases"][name]["profile"]
    return {int(p["bus"]): cmath.rect(p["vm"], math.radians(p["va_deg"])) for p in prof}


def reference_source() -> str:
    return _table().get("solver", "")
