"""Report serialization: JSON reports with config digests, CSV traces."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def config_digest(config_text: str) -> str:
    return hashlib.sha256(config_text.encode("utf-8")).hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "-inf" if obj < 0 else "inf"
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_report(path, payload: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, allow_nan=False)
                    + "\n")


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())


def write_trace(path, rows):
    """rows: iterable of (step, quantity, value)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "quantity", "value"])
        for step, quantity, value in rows:
            w.writerow([step, quantity, repr(float(value))])


def qr_trace_rows(run, prefix: str = "lambda"):
    rows = []
    for rec in run.trace:
        step = int(rec[0])
        for i, val in enumerate(rec[1:]):
            rows.append((step, f"{prefix}_{i + 1}", val))
    return rows
