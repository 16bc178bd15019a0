"""CSV and JSON output for benchmark runs."""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from ddw.bench.metrics import to_csv


def _plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        for prop in ("passed", "slack"):
            if hasattr(type(obj), prop):
                out[prop] = _plain(getattr(obj, prop))
        return out
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # JSON has no inf/nan; keep them readable
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def report_to_dict(report) -> dict:
    return _plain(report)


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(obj), indent=1) + "\n")


def write_csv(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_csv(rows))


def append_csv(path, rows) -> None:
    """Append rows, writing the header only when the file is new or empty."""
    path = Path(path)
    text = to_csv(rows)
    if path.exists() and path.stat().st_size:
        text = text.split("\n", 1)[1]
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        fh.write(text)
