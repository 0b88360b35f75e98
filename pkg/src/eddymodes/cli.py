"""Scenario-driven command line: assemble, modes, simulate, extract, image,
pipeline.

Every command reads one scenario JSON file and writes artifacts into an output
directory. All randomness comes from the scenario's seed, artifacts are
serialized deterministically, and failures map to stable exit codes:
0 ok, 2 validation, 3 numerical, 4 inconclusive imaging.
"""
from __future__ import annotations

import argparse
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import io
from .assembly import (OperatorPair, build_operator_pair, loop_mutual_inductance,
                       mutual_coupling)
from .errors import (ExtractionError, InconclusiveError, NumericalError,
                     ValidationError)
from .extraction import (DecaySignal, ExtractedSpectrum, extract_time_constants,
                         merge_spectra)
from .imaging import occupancy_grid, run_imaging
from .modes import ModalBasis, solve_modes
from .scenario import Scenario, load_scenario
from .simulate import driven_response, sensor_trace, step_off_coefficients

__all__ = ["main", "run"]

COMMANDS = ("assemble", "modes", "simulate", "extract", "image", "pipeline")

# Relative noise floor used for MP-test tolerances when the scenario neither
# pins a tolerance nor provides extraction diagnostics to size one from.
TOLERANCE_FLOOR = 1e-9


@contextmanager
def _stage(name: str):
    """Tag numerical failures with the pipeline stage they occurred in."""
    try:
        yield
    except NumericalError as exc:
        if not getattr(exc, "stage", None):
            exc.stage = name
        raise


def _log(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


def _solve(scenario: Scenario) -> tuple[OperatorPair, ModalBasis]:
    with _stage("assembly"):
        pair = build_operator_pair(scenario.grid, scenario.resistivity)
    with _stage("eigensolver"):
        basis = solve_modes(pair)
    return pair, basis


def _simulate_traces(scenario: Scenario, pair: OperatorPair, basis: ModalBasis):
    """Run the configured forward simulation.

    Returns ``(times, values, sensor_ids)`` where rows are pickup-loop
    voltages first, then probe field components; noise (if configured) is
    already applied, drawn from the scenario seed.
    """
    sensors = scenario.require("sensors")
    sim = scenario.require("simulation")
    loop = scenario.require("source_loop")
    waveform = scenario.require("waveform")
    grid = scenario.grid

    times = np.linspace(sim["t_start"], sim["t_end"], sim["n_samples"])
    with _stage("forward-sim"):
        m = mutual_coupling(grid, loop)
        if waveform["kind"] == "step_off":
            coeffs = step_off_coefficients(pair, basis, m, waveform["amplitude"])
            traces = sensor_trace(grid, basis, coeffs, sensors, times)
            voltages = traces.voltages
            probe_fields = traces.probe_fields
        else:
            # Sampled drive: integrate cell currents on the waveform grid,
            # then sample sensors; pickup voltage is the time derivative of
            # total flux, including the direct source-to-loop coupling.
            i_s = waveform["values"]
            dt = waveform["dt"]
            drive_times = np.arange(i_s.size) * dt
            x = driven_response(pair, basis, m, i_s, dt)
            if times[-1] > drive_times[-1] + 1e-12 * dt:
                raise ValidationError(
                    "simulation.t_end: exceeds the sampled drive duration"
                )
            edge_currents = grid.incidence @ x.T  # (n_edges, nt_drive)
            from .assembly import _edge_field_factors

            n_probes = len(sensors.probes)
            probe_fields = np.zeros((n_probes, times.size, 3))
            for i, probe in enumerate(sensors.probes):
                fac = _edge_field_factors(grid, probe)       # (n_edges, 3)
                full = fac.T @ edge_currents                 # (3, nt_drive)
                for c in range(3):
                    probe_fields[i, :, c] = np.interp(times, drive_times, full[c])
            voltages = np.zeros((len(sensors.pickup_loops), times.size))
            for k, pickup in enumerate(sensors.pickup_loops):
                m_k = mutual_coupling(grid, pickup)
                m_direct = loop_mutual_inductance(loop, pickup, mu0=grid.mu0,
                                                  radius=grid.wire_radius)
                flux = x @ m_k + m_direct * i_s
                dflux = np.gradient(flux, dt)
                voltages[k] = np.interp(times, drive_times, dflux)

    sensor_ids = [f"loop{k}" for k in range(voltages.shape[0])]
    rows = [voltages[k] for k in range(voltages.shape[0])]
    for i in range(probe_fields.shape[0]):
        for c, comp in enumerate(("bx", "by", "bz")):
            sensor_ids.append(f"probe{i}.{comp}")
            rows.append(probe_fields[i, :, c])
    values = np.vstack(rows) if rows else np.zeros((0, times.size))

    if sim["noise_snr_db"] is not None:
        rng = np.random.default_rng(scenario.seed)
        factor = 10.0 ** (-sim["noise_snr_db"] / 20.0)
        for k in range(values.shape[0]):
            sigma = factor * float(np.sqrt(np.mean(values[k] ** 2)))
            if sigma > 0.0:
                values[k] = values[k] + rng.normal(0.0, sigma, size=values[k].size)
    return times, values, sensor_ids


def _extract_spectrum(scenario: Scenario, times, values, sensor_ids):
    """Per-sensor matrix-pencil extraction merged into one spectrum.

    Sensors whose trace carries no extractable decay (identically zero
    components, for instance) are skipped and reported in the diagnostics;
    at least one sensor must succeed.
    """
    extraction = scenario.require("extraction")
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=0.0, atol=1e-9 * abs(dts[0])):
        raise ValidationError("trace times: extraction needs uniform sampling")
    dt = float(dts[0])
    spectra: list[ExtractedSpectrum] = []
    skipped: list[str] = []
    last_error: ExtractionError | None = None
    with _stage("extraction"):
        for sid, samples in zip(sensor_ids, values):
            signal = DecaySignal(samples=samples, dt=dt, t_start=float(times[0]))
            try:
                spectra.append(extract_time_constants(signal, extraction["max_order"]))
            except ExtractionError as exc:
                skipped.append(sid)
                last_error = exc
        if not spectra:
            raise last_error if last_error is not None else ExtractionError(
                "no traces to extract from"
            )
        merged = merge_spectra(spectra)
    error_bound = max(
        max(
            (s.diagnostics.get("rel_residual", 0.0)
             / max(s.diagnostics.get("sv_min_retained", 1.0), 1e-300))
            for s in spectra
        ),
        TOLERANCE_FLOOR,
    ) * float(np.max(merged.taus))
    doc = {
        "schema_version": 1,
        "taus": merged.taus,
        "amplitudes": merged.amplitudes,
        "noise_floor": merged.noise_floor,
        "retained": merged.retained,
        "error_bound": error_bound,
        "skipped_sensors": skipped,
        "per_sensor": {
            sid: {"taus": s.taus, "amplitudes": s.amplitudes,
                  "diagnostics": s.diagnostics}
            for sid, s in zip([i for i in sensor_ids if i not in skipped], spectra)
        },
    }
    return merged, error_bound, doc


def _measured_taus_for_imaging(scenario: Scenario, out: Path, quiet: bool):
    """Measured decay constants plus a tolerance: explicit from the scenario,
    or recovered by chaining simulate + extract."""
    imaging = scenario.require("imaging")
    if imaging["measured_taus"] is not None:
        measured = imaging["measured_taus"]
        tolerance = imaging["tolerance"]
        if tolerance is None:
            tolerance = TOLERANCE_FLOOR * float(np.max(measured))
        return measured, tolerance
    pair, basis = _solve(scenario)
    times, values, sensor_ids = _simulate_traces(scenario, pair, basis)
    io.write_traces_csv(out / "traces.csv", times, values, sensor_ids)
    merged, error_bound, doc = _extract_spectrum(scenario, times, values, sensor_ids)
    io.write_json(out / "spectrum.json", doc)
    _log(quiet, f"extracted {merged.retained} decay constants")
    tolerance = imaging["tolerance"]
    if tolerance is None:
        tolerance = 3.0 * error_bound
    return merged.taus, tolerance


def _cmd_assemble(scenario: Scenario, out: Path, threads: int, quiet: bool) -> int:
    with _stage("assembly"):
        pair = build_operator_pair(scenario.grid, scenario.resistivity)
    io.write_matrix_csv(out / "resistance.csv", pair.R)
    io.write_matrix_csv(out / "inductance.csv", pair.L)
    _log(quiet, f"assembled {pair.dof}-DOF operators -> resistance.csv, inductance.csv")
    return 0


def _cmd_modes(scenario: Scenario, out: Path, threads: int, quiet: bool) -> int:
    _, basis = _solve(scenario)
    io.write_json(out / "taus.json", {"schema_version": 1, "taus": basis.taus})
    io.write_json(out / "modes.json", {"schema_version": 1, **basis.to_dict()})
    _log(quiet, f"solved {basis.dof} modes, slowest tau = {float(basis.taus[0])}")
    return 0


def _cmd_simulate(scenario: Scenario, out: Path, threads: int, quiet: bool) -> int:
    pair, basis = _solve(scenario)
    times, values, sensor_ids = _simulate_traces(scenario, pair, basis)
    io.write_traces_csv(out / "traces.csv", times, values, sensor_ids)
    _log(quiet, f"simulated {len(sensor_ids)} traces x {times.size} samples -> traces.csv")
    return 0


def _cmd_extract(scenario: Scenario, out: Path, threads: int, quiet: bool) -> int:
    extraction = scenario.require("extraction")
    if extraction["traces_csv"] is not None:
        times, values, sensor_ids = io.read_traces_csv(
            scenario.base_dir / extraction["traces_csv"]
        )
    else:
        pair, basis = _solve(scenario)
        times, values, sensor_ids = _simulate_traces(scenario, pair, basis)
        io.write_traces_csv(out / "traces.csv", times, values, sensor_ids)
    merged, _, doc = _extract_spectrum(scenario, times, values, sensor_ids)
    io.write_json(out / "spectrum.json", doc)
    _log(quiet, f"extracted taus {[float(t) for t in merged.taus]} -> spectrum.json")
    return 0


def _cmd_image(scenario: Scenario, out: Path, threads: int, quiet: bool) -> int:
    imaging = scenario.require("imaging")
    measured, tolerance = _measured_taus_for_imaging(scenario, out, quiet)
    with _stage("imaging"):
        report = run_imaging(
            scenario.grid, imaging["eta_background"], imaging["eta_inclusion"],
            measured, tolerance, candidate_family=imaging["candidate_family"],
            block_size=imaging["block_size"], n_constants=imaging["n_constants"],
            n_threads=threads,
        )
    io.write_json(out / "imaging_report.json",
                  {"schema_version": 1, **report.to_dict()})
    io.write_occupancy_csv(out / "occupancy.csv",
                           occupancy_grid(scenario.grid, report.bounds))
    _log(quiet, f"imaging bounds: inner {report.bounds.inner.n_active} cells, "
                f"outer {report.bounds.outer.n_active} cells")
    return 0


def _cmd_pipeline(scenario: Scenario, out: Path, threads: int, quiet: bool) -> int:
    imaging = scenario.require("imaging")
    pair, basis = _solve(scenario)
    io.write_json(out / "taus.json", {"schema_version": 1, "taus": basis.taus})
    io.write_json(out / "modes.json", {"schema_version": 1, **basis.to_dict()})

    times, values, sensor_ids = _simulate_traces(scenario, pair, basis)
    io.write_traces_csv(out / "traces.csv", times, values, sensor_ids)

    merged, error_bound, doc = _extract_spectrum(scenario, times, values, sensor_ids)
    io.write_json(out / "spectrum.json", doc)

    tolerance = imaging["tolerance"]
    if tolerance is None:
        tolerance = 3.0 * error_bound
    with _stage("imaging"):
        report = run_imaging(
            scenario.grid, imaging["eta_background"], imaging["eta_inclusion"],
            merged.taus, tolerance, candidate_family=imaging["candidate_family"],
            block_size=imaging["block_size"], n_constants=imaging["n_constants"],
            n_threads=threads,
        )
    io.write_json(out / "imaging_report.json",
                  {"schema_version": 1, **report.to_dict()})
    io.write_occupancy_csv(out / "occupancy.csv",
                           occupancy_grid(scenario.grid, report.bounds))

    summary = {
        "schema_version": 1,
        "seed": scenario.seed,
        "modal_taus": basis.taus,
        "extracted_taus": merged.taus,
        "extraction_error_bound": error_bound,
        "tolerance": tolerance,
        "inner_cells": report.bounds.inner.indices().tolist(),
        "outer_cells": report.bounds.outer.indices().tolist(),
        "true_inclusion_cells": (list(scenario.inclusion_cells)
                                 if scenario.inclusion_cells is not None else None),
        "artifacts": ["taus.json", "modes.json", "traces.csv", "spectrum.json",
                      "imaging_report.json", "occupancy.csv"],
    }
    io.write_json(out / "pipeline.json", summary)
    _log(quiet, "pipeline complete -> pipeline.json")
    return 0


_DISPATCH = {
    "assemble": _cmd_assemble,
    "modes": _cmd_modes,
    "simulate": _cmd_simulate,
    "extract": _cmd_extract,
    "image": _cmd_image,
    "pipeline": _cmd_pipeline,
}


def run(command: str, scenario_path, out_dir, threads: int = 1,
        quiet: bool = False) -> int:
    """Execute one command against a scenario file; returns the exit status."""
    try:
        if command not in _DISPATCH:
            raise ValidationError(
                f"unknown command {command!r}; expected one of {sorted(_DISPATCH)}"
            )
        if threads < 1:
            raise ValidationError("--threads: must be >= 1")
        scenario = load_scenario(scenario_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        return _DISPATCH[command](scenario, out, threads, quiet)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        stage = getattr(exc, "stage", "numerics")
        print(f"numerical failure in {stage}: {exc}", file=sys.stderr)
        return 3
    except InconclusiveError as exc:
        print(f"inconclusive imaging: {exc}", file=sys.stderr)
        return 4


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="eddymodes",
        description="Thin-plate eddy-current decay modes: forward simulation, "
                    "decay-constant extraction, and monotonicity imaging.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for candidate sweeps (default 1)")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    args = parser.parse_args(argv)
    return run(args.command, args.scenario, args.out, threads=args.threads,
               quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
