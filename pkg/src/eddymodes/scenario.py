"""Scenario files: one JSON document describing a full measurement pipeline.

A scenario pins everything a run needs (grid, resistivity, source coil and
waveform, sensors, sampling, extraction and imaging settings, and one RNG
seed) so identical files reproduce identical artifacts. Validation is strict:
unknown fields are rejected, and every message is anchored to its JSON path
(parse errors carry the line and column from the decoder).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import SensorSet
from .errors import ValidationError
from .grid import InclusionMask, PlateGrid, ResistivityMap, build_grid, mask_to_resistivity

__all__ = [
    "SCHEMA_VERSION",
    "Scenario",
    "load_scenario",
    "parse_scenario",
]

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version", "seed", "unit_system", "grid", "resistivity", "source",
    "sensors", "simulation", "extraction", "imaging", "metadata",
}


def _expect_dict(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected an object, got {type(obj).__name__}")
    return obj


def _check_keys(obj: dict, allowed: set, required: set, path: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ValidationError(f"{path}: unknown field(s) {unknown}")
    missing = sorted(required - set(obj))
    if missing:
        raise ValidationError(f"{path}: missing required field(s) {missing}")


def _number(obj, path: str, *, positive: bool = False, nonnegative: bool = False) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ValidationError(f"{path}: expected a number, got {type(obj).__name__}")
    v = float(obj)
    if not np.isfinite(v):
        raise ValidationError(f"{path}: must be finite")
    if positive and v <= 0:
        raise ValidationError(f"{path}: must be > 0")
    if nonnegative and v < 0:
        raise ValidationError(f"{path}: must be >= 0")
    return v


def _integer(obj, path: str, *, minimum: int | None = None) -> int:
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise ValidationError(f"{path}: expected an integer, got {type(obj).__name__}")
    if minimum is not None and obj < minimum:
        raise ValidationError(f"{path}: must be >= {minimum}")
    return obj


def _string(obj, path: str, choices: tuple | None = None) -> str:
    if not isinstance(obj, str):
        raise ValidationError(f"{path}: expected a string, got {type(obj).__name__}")
    if choices is not None and obj not in choices:
        raise ValidationError(f"{path}: expected one of {sorted(choices)}, got {obj!r}")
    return obj


def _points(obj, path: str, min_len: int) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) < min_len:
        raise ValidationError(f"{path}: expected a list of at least {min_len} [x, y, z] points")
    pts = []
    for i, p in enumerate(obj):
        if not isinstance(p, list) or len(p) != 3:
            raise ValidationError(f"{path}[{i}]: expected [x, y, z]")
        pts.append([_number(c, f"{path}[{i}][{j}]") for j, c in enumerate(p)])
    return np.asarray(pts, dtype=float)


def _float_list(obj, path: str, *, min_len: int = 1, positive: bool = False) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) < min_len:
        raise ValidationError(f"{path}: expected a list of at least {min_len} number(s)")
    return np.asarray(
        [_number(v, f"{path}[{i}]", positive=positive) for i, v in enumerate(obj)],
        dtype=float,
    )


@dataclass(frozen=True)
class Scenario:
    """Validated pipeline configuration plus the directory it resolves paths in."""

    seed: int
    grid: PlateGrid
    resistivity: ResistivityMap
    inclusion_cells: tuple[int, ...] | None
    source_loop: np.ndarray | None
    waveform: dict | None
    sensors: SensorSet | None
    simulation: dict | None
    extraction: dict | None
    imaging: dict | None
    metadata: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def require(self, section: str):
        value = getattr(self, section)
        if value is None:
            raise ValidationError(f"scenario: this command needs the '{section}' section")
        return value


def _parse_resistivity(obj, grid: PlateGrid, path: str):
    obj = _expect_dict(obj, path)
    kind = _string(obj.get("kind"), f"{path}.kind", ("uniform", "mask", "explicit"))
    if kind == "uniform":
        _check_keys(obj, {"kind", "eta"}, {"kind", "eta"}, path)
        eta = _number(obj["eta"], f"{path}.eta", positive=True)
        return ResistivityMap.uniform(grid, eta), None
    if kind == "mask":
        keys = {"kind", "eta_background", "eta_inclusion", "cells"}
        _check_keys(obj, keys, keys, path)
        bg = _number(obj["eta_background"], f"{path}.eta_background", positive=True)
        inc = _number(obj["eta_inclusion"], f"{path}.eta_inclusion", positive=True)
        cells_obj = obj["cells"]
        if not isinstance(cells_obj, list):
            raise ValidationError(f"{path}.cells: expected a list of cell indices")
        cells = [
            _integer(c, f"{path}.cells[{i}]", minimum=0) for i, c in enumerate(cells_obj)
        ]
        for i, c in enumerate(cells):
            if c >= grid.n_cells:
                raise ValidationError(
                    f"{path}.cells[{i}]: cell index {c} out of range for {grid.n_cells} cells"
                )
        mask = InclusionMask.from_indices(grid, cells)
        return mask_to_resistivity(grid, mask, bg, inc), tuple(sorted(set(cells)))
    _check_keys(obj, {"kind", "values"}, {"kind", "values"}, path)
    values = _float_list(obj["values"], f"{path}.values", min_len=grid.n_cells, positive=True)
    if values.size != grid.n_cells:
        raise ValidationError(
            f"{path}.values: expected {grid.n_cells} entries, got {values.size}"
        )
    return ResistivityMap(grid, values), None


def _parse_waveform(obj, path: str) -> dict:
    obj = _expect_dict(obj, path)
    kind = _string(obj.get("kind"), f"{path}.kind", ("step_off", "samples"))
    if kind == "step_off":
        _check_keys(obj, {"kind", "amplitude"}, {"kind", "amplitude"}, path)
        return {"kind": kind, "amplitude": _number(obj["amplitude"], f"{path}.amplitude")}
    _check_keys(obj, {"kind", "dt", "values"}, {"kind", "dt", "values"}, path)
    return {
        "kind": kind,
        "dt": _number(obj["dt"], f"{path}.dt", positive=True),
        "values": _float_list(obj["values"], f"{path}.values", min_len=2),
    }


def _parse_sensors(obj, grid: PlateGrid, path: str) -> SensorSet:
    obj = _expect_dict(obj, path)
    _check_keys(obj, {"probes", "pickup_loops"}, set(), path)
    probes = np.zeros((0, 3))
    if "probes" in obj:
        probes = _points(obj["probes"], f"{path}.probes", 1)
    loops = []
    if "pickup_loops" in obj:
        raw = obj["pickup_loops"]
        if not isinstance(raw, list):
            raise ValidationError(f"{path}.pickup_loops: expected a list of loops")
        loops = [
            _points(lp, f"{path}.pickup_loops[{i}]", 3) for i, lp in enumerate(raw)
        ]
    if probes.shape[0] == 0 and not loops:
        raise ValidationError(f"{path}: needs at least one probe or pickup loop")
    sensors = SensorSet(probes=probes, pickup_loops=loops)
    sensors.validate_against(grid)
    return sensors


def _parse_simulation(obj, path: str) -> dict:
    obj = _expect_dict(obj, path)
    allowed = {"t_end", "n_samples", "t_start", "noise_snr_db"}
    _check_keys(obj, allowed, {"t_end", "n_samples"}, path)
    out = {
        "t_end": _number(obj["t_end"], f"{path}.t_end", positive=True),
        "n_samples": _integer(obj["n_samples"], f"{path}.n_samples", minimum=3),
        "t_start": 0.0,
        "noise_snr_db": None,
    }
    if "t_start" in obj:
        out["t_start"] = _number(obj["t_start"], f"{path}.t_start", nonnegative=True)
    if out["t_start"] >= out["t_end"]:
        raise ValidationError(f"{path}.t_start: must be < t_end")
    if obj.get("noise_snr_db") is not None:
        out["noise_snr_db"] = _number(obj["noise_snr_db"], f"{path}.noise_snr_db",
                                      positive=True)
    return out


def _parse_extraction(obj, path: str) -> dict:
    obj = _expect_dict(obj, path)
    _check_keys(obj, {"max_order", "traces_csv"}, {"max_order"}, path)
    out = {"max_order": _integer(obj["max_order"], f"{path}.max_order", minimum=1),
           "traces_csv": None}
    if "traces_csv" in obj:
        out["traces_csv"] = _string(obj["traces_csv"], f"{path}.traces_csv")
    return out


def _parse_imaging(obj, path: str) -> dict:
    obj = _expect_dict(obj, path)
    allowed = {"eta_background", "eta_inclusion", "candidate_family", "block_size",
               "tolerance", "n_constants", "measured_taus"}
    required = {"eta_background", "eta_inclusion", "candidate_family"}
    _check_keys(obj, allowed, required, path)
    out = {
        "eta_background": _number(obj["eta_background"], f"{path}.eta_background",
                                  positive=True),
        "eta_inclusion": _number(obj["eta_inclusion"], f"{path}.eta_inclusion",
                                 positive=True),
        "candidate_family": _string(obj["candidate_family"], f"{path}.candidate_family",
                                    ("single-cell", "block")),
        "block_size": 2,
        "tolerance": None,
        "n_constants": 5,
        "measured_taus": None,
    }
    if out["eta_background"] == out["eta_inclusion"]:
        raise ValidationError(
            f"{path}: eta_background and eta_inclusion must differ to define a contrast"
        )
    if "block_size" in obj:
        out["block_size"] = _integer(obj["block_size"], f"{path}.block_size", minimum=1)
    if obj.get("tolerance") is not None:
        out["tolerance"] = _number(obj["tolerance"], f"{path}.tolerance", nonnegative=True)
    if "n_constants" in obj:
        out["n_constants"] = _integer(obj["n_constants"], f"{path}.n_constants", minimum=1)
    if obj.get("measured_taus") is not None:
        out["measured_taus"] = _float_list(obj["measured_taus"], f"{path}.measured_taus",
                                           positive=True)
    return out


def parse_scenario(doc: dict, base_dir: Path | str = ".") -> Scenario:
    """Validate a decoded scenario document into a :class:`Scenario`."""
    doc = _expect_dict(doc, "scenario")
    _check_keys(doc, _TOP_KEYS, {"schema_version", "seed", "grid", "resistivity"},
                "scenario")
    version = _integer(doc["schema_version"], "scenario.schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"scenario.schema_version: expected {SCHEMA_VERSION}, got {version}"
        )
    seed = _integer(doc["seed"], "scenario.seed", minimum=0)
    unit_system = "SI"
    if "unit_system" in doc:
        unit_system = _string(doc["unit_system"], "scenario.unit_system",
                              ("SI", "normalized"))

    gobj = _expect_dict(doc["grid"], "scenario.grid")
    allowed = {"nx", "ny", "pitch", "thickness", "origin"}
    _check_keys(gobj, allowed, {"nx", "ny", "pitch", "thickness"}, "scenario.grid")
    origin = (0.0, 0.0)
    if "origin" in gobj:
        o = gobj["origin"]
        if not isinstance(o, list) or len(o) != 2:
            raise ValidationError("scenario.grid.origin: expected [x, y]")
        origin = (_number(o[0], "scenario.grid.origin[0]"),
                  _number(o[1], "scenario.grid.origin[1]"))
    grid = build_grid(
        _integer(gobj["nx"], "scenario.grid.nx", minimum=1),
        _integer(gobj["ny"], "scenario.grid.ny", minimum=1),
        _number(gobj["pitch"], "scenario.grid.pitch", positive=True),
        _number(gobj["thickness"], "scenario.grid.thickness", positive=True),
        origin=origin,
        unit_system=unit_system,
    )

    resistivity, inclusion_cells = _parse_resistivity(
        doc["resistivity"], grid, "scenario.resistivity"
    )

    source_loop = waveform = None
    if "source" in doc:
        sobj = _expect_dict(doc["source"], "scenario.source")
        _check_keys(sobj, {"loop", "waveform"}, {"loop", "waveform"}, "scenario.source")
        source_loop = _points(sobj["loop"], "scenario.source.loop", 3)
        waveform = _parse_waveform(sobj["waveform"], "scenario.source.waveform")

    sensors = None
    if "sensors" in doc:
        sensors = _parse_sensors(doc["sensors"], grid, "scenario.sensors")

    simulation = _parse_simulation(doc["simulation"], "scenario.simulation") \
        if "simulation" in doc else None
    extraction = _parse_extraction(doc["extraction"], "scenario.extraction") \
        if "extraction" in doc else None
    imaging = _parse_imaging(doc["imaging"], "scenario.imaging") \
        if "imaging" in doc else None

    metadata = {}
    if "metadata" in doc:
        metadata = _expect_dict(doc["metadata"], "scenario.metadata")

    return Scenario(
        seed=seed, grid=grid, resistivity=resistivity,
        inclusion_cells=inclusion_cells, source_loop=source_loop, waveform=waveform,
        sensors=sensors, simulation=simulation, extraction=extraction,
        imaging=imaging, metadata=metadata, base_dir=Path(base_dir),
    )


def load_scenario(path) -> Scenario:
    """Read and validate a scenario JSON file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read scenario file: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"
        ) from exc
    return parse_scenario(doc, base_dir=path.parent)
