"""Thin-plate eddy-current decay modes and monotonicity-based inclusion imaging.

The forward chain discretizes a conducting plate into cell-loop currents,
assembles the resistance/inductance operator pair, solves the generalized
eigenproblem for decay modes, and simulates coil-driven transients and sensor
waveforms. The inverse chain recovers decay constants from waveforms and
brackets a two-valued resistive inclusion between inner and outer cell sets
using one-sided monotonicity tests.
"""
from __future__ import annotations

from .assembly import (
    MU_0,
    OperatorPair,
    SensorSet,
    assemble_inductance,
    assemble_resistance,
    b_field,
    build_operator_pair,
    loop_mutual_inductance,
    mutual_coupling,
    segment_mutual_inductance,
)
from .errors import (
    AssemblyError,
    ConvergenceError,
    DefinitenessError,
    EddymodesError,
    ExtractionError,
    InconclusiveError,
    NumericalError,
    SignalTooShortError,
    ValidationError,
)
from .estimators import MonotonicityImager, TimeConstantExtractor
from .extraction import (
    DecaySignal,
    ExtractedSpectrum,
    extract_time_constants,
    merge_spectra,
    truncate_by_noise,
)
from .grid import (
    InclusionMask,
    PlateGrid,
    ResistivityMap,
    build_grid,
    incidence_matrix,
    mask_to_resistivity,
)
from .io import (
    read_matrix_csv,
    read_traces_csv,
    write_json,
    write_matrix_csv,
    write_occupancy_csv,
    write_traces_csv,
)
from .imaging import (
    ImagingReport,
    InclusionBounds,
    MPTestResult,
    TauPredictor,
    mp_test,
    occupancy_grid,
    predicted_taus,
    reconstruct_bounds,
    run_imaging,
)
from .modes import (
    MinMaxCertificate,
    ModalBasis,
    rayleigh_quotient,
    solve_modes,
    verify_minmax,
)
from .scenario import SCHEMA_VERSION, Scenario, load_scenario, parse_scenario
from .simulate import (
    CircuitParams,
    FreeResponse,
    SensorTraces,
    circuit_params,
    driven_response,
    free_response,
    project_initial,
    sensor_trace,
    step_off_coefficients,
)

__version__ = "0.1.0"

__all__ = [
    "MU_0",
    "__version__",
    # grid
    "PlateGrid", "InclusionMask", "ResistivityMap",
    "build_grid", "incidence_matrix", "mask_to_resistivity",
    # assembly
    "OperatorPair", "SensorSet",
    "assemble_resistance", "assemble_inductance", "build_operator_pair",
    "b_field", "mutual_coupling", "loop_mutual_inductance", "segment_mutual_inductance",
    # modes
    "ModalBasis", "MinMaxCertificate", "solve_modes", "rayleigh_quotient", "verify_minmax",
    # simulate
    "CircuitParams", "FreeResponse", "SensorTraces",
    "project_initial", "free_response", "step_off_coefficients", "circuit_params",
    "driven_response", "sensor_trace",
    # extraction
    "DecaySignal", "ExtractedSpectrum",
    "extract_time_constants", "truncate_by_noise", "merge_spectra",
    # imaging
    "MPTestResult", "InclusionBounds", "ImagingReport", "TauPredictor",
    "predicted_taus", "mp_test", "reconstruct_bounds", "run_imaging", "occupancy_grid",
    # io
    "write_json", "write_matrix_csv", "read_matrix_csv",
    "write_traces_csv", "read_traces_csv", "write_occupancy_csv",
    # scenario
    "SCHEMA_VERSION", "Scenario", "load_scenario", "parse_scenario",
    # estimators
    "TimeConstantExtractor", "MonotonicityImager",
    # errors
    "EddymodesError", "ValidationError", "NumericalError", "AssemblyError",
    "DefinitenessError", "ConvergenceError", "ExtractionError",
    "SignalTooShortError", "InconclusiveError",
]
