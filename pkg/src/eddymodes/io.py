"""Deterministic artifact serialization: JSON documents and CSV tables.

JSON is written with sorted keys, two-space indent, and a trailing newline;
floats go through Python's shortest round-trip repr, so identical values
produce byte-identical files. CSV matrices are row-major, full precision.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ValidationError

__all__ = [
    "to_jsonable",
    "dump_json",
    "write_json",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_traces_csv",
    "read_traces_csv",
    "write_occupancy_csv",
]


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays to plain Python objects."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        raise ValidationError("non-finite value is not representable in JSON output")
    return obj


def dump_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dump_json(obj), encoding="utf-8")
    return path


def write_matrix_csv(path, matrix) -> Path:
    """Row-major full-precision CSV of a 2-D array (no header)."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise ValidationError("matrix CSV export expects a 2-D array")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        for row in a:
            w.writerow([repr(float(v)) for v in row])
    return path


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as f:
        for row in csv.reader(f):
            if row:
                rows.append([float(v) for v in row])
    if not rows:
        raise ValidationError(f"{path}: empty matrix CSV")
    return np.asarray(rows, dtype=float)


def write_traces_csv(path, times, values, sensor_ids=None) -> Path:
    """Long-format trace table: columns time, sensor_id, value.

    ``values``: (n_sensors, n_times) array; ``sensor_ids`` default to the
    row index.
    """
    t = np.asarray(times, dtype=float)
    v = np.atleast_2d(np.asarray(values, dtype=float))
    if v.shape[1] != t.shape[0]:
        raise ValidationError("trace values and times disagree on sample count")
    if sensor_ids is None:
        sensor_ids = [str(i) for i in range(v.shape[0])]
    if len(sensor_ids) != v.shape[0]:
        raise ValidationError("sensor_ids length does not match trace count")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["time", "sensor_id", "value"])
        for sid, row in zip(sensor_ids, v):
            for tk, vk in zip(t, row):
                w.writerow([repr(float(tk)), sid, repr(float(vk))])
    return path


def read_traces_csv(path):
    """Inverse of :func:`write_traces_csv`.

    Returns ``(times, values, sensor_ids)`` with ``values`` of shape
    (n_sensors, n_times). Every sensor must be sampled on the same time grid.
    """
    by_sensor: dict[str, list[tuple[float, float]]] = {}
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["time", "sensor_id", "value"]:
            raise ValidationError(
                f"{path}: expected header 'time,sensor_id,value', got {header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                tk, vk = float(row[0]), float(row[2])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: non-numeric field: {exc}") from exc
            by_sensor.setdefault(row[1], []).append((tk, vk))
    if not by_sensor:
        raise ValidationError(f"{path}: no trace rows")
    sensor_ids = list(by_sensor)
    base = np.asarray([t for t, _ in by_sensor[sensor_ids[0]]], dtype=float)
    values = np.empty((len(sensor_ids), base.size), dtype=float)
    for i, sid in enumerate(sensor_ids):
        pairs = by_sensor[sid]
        t = np.asarray([p[0] for p in pairs], dtype=float)
        if t.shape != base.shape or not np.array_equal(t, base):
            raise ValidationError(f"{path}: sensor {sid!r} is not on the shared time grid")
        values[i] = [p[1] for p in pairs]
    return base, values, sensor_ids


def write_occupancy_csv(path, occupancy) -> Path:
    """Integer grid CSV (0 outside, 1 outer-only, 2 inner), one row per grid row."""
    a = np.asarray(occupancy)
    if a.ndim != 2:
        raise ValidationError("occupancy export expects a 2-D integer grid")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        for row in a:
            w.writerow([int(v) for v in row])
    return path
