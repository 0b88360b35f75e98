"""Scikit-learn style estimators wrapping the two inversion algorithms.

Both follow the fit/attributes/predict conventions: constructor arguments are
stored verbatim (so ``get_params``/``set_params`` round-trip), all derived
state lands in trailing-underscore attributes during ``fit``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ValidationError
from .extraction import DecaySignal, ExtractedSpectrum, extract_time_constants, merge_spectra
from .grid import PlateGrid
from .imaging import occupancy_grid, run_imaging
from .validation import as_float_array, require

__all__ = ["TimeConstantExtractor", "MonotonicityImager"]


class TimeConstantExtractor(BaseEstimator):
    """Recover exponential decay constants and amplitudes from sampled traces.

    Parameters
    ----------
    max_order : int
        Largest number of decay modes the pencil may retain.
    dt : float or None
        Sample spacing, required when ``fit`` receives a plain array.
    t_start : float
        Absolute time of the first sample; amplitudes are referenced back
        to t = 0.

    Attributes (after ``fit``)
    --------------------------
    taus_, amplitudes_, noise_floor_, retained_, spectrum_
    """

    def __init__(self, max_order: int = 8, dt: float | None = None,
                 t_start: float = 0.0):
        self.max_order = max_order
        self.dt = dt
        self.t_start = t_start

    def _as_signals(self, X) -> list[DecaySignal]:
        if isinstance(X, DecaySignal):
            return [X]
        if isinstance(X, (list, tuple)) and X and isinstance(X[0], DecaySignal):
            return list(X)
        arr = as_float_array("X", X)
        if self.dt is None:
            raise ValidationError("dt must be set to fit on a plain sample array")
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise ValidationError("X: expected a trace vector or a stack of traces")
        return [DecaySignal(samples=row, dt=self.dt, t_start=self.t_start)
                for row in arr]

    def fit(self, X, y=None) -> "TimeConstantExtractor":
        """X: DecaySignal, list of DecaySignal, or array (n_traces?, n_samples)."""
        signals = self._as_signals(X)
        spectra = [extract_time_constants(s, self.max_order) for s in signals]
        spectrum = spectra[0] if len(spectra) == 1 else merge_spectra(spectra)
        self.spectrum_: ExtractedSpectrum = spectrum
        self.taus_ = spectrum.taus
        self.amplitudes_ = spectrum.amplitudes
        self.noise_floor_ = spectrum.noise_floor
        self.retained_ = spectrum.retained
        return self

    def predict(self, times) -> np.ndarray:
        """Reconstruct the fitted multi-exponential at the given times."""
        if not hasattr(self, "taus_"):
            raise ValidationError("estimator is not fitted yet; call fit first")
        t = as_float_array("times", times, ndim=1)
        return (self.amplitudes_[None, :] *
                np.exp(-t[:, None] / self.taus_[None, :])).sum(axis=1)


class MonotonicityImager(BaseEstimator):
    """Bound an inclusion from measured decay constants via monotonicity tests.

    Parameters mirror :func:`eddymodes.imaging.run_imaging`; the estimator is
    used like a clusterer: ``fit`` on the measured decay constants, then read
    the cell-wise labels from ``occupancy_`` (0 outside the outer bound,
    1 in the outer bound only, 2 certified inner) or ``fit_predict``.
    """

    def __init__(self, grid: PlateGrid, eta_background: float,
                 eta_inclusion: float, candidate_family: str = "single-cell",
                 block_size: int = 2, tolerance: float | None = None,
                 n_constants: int = 5, n_threads: int = 1):
        self.grid = grid
        self.eta_background = eta_background
        self.eta_inclusion = eta_inclusion
        self.candidate_family = candidate_family
        self.block_size = block_size
        self.tolerance = tolerance
        self.n_constants = n_constants
        self.n_threads = n_threads

    def fit(self, X, y=None) -> "MonotonicityImager":
        """X: 1-D array of measured decay constants (decreasing or not)."""
        measured = as_float_array("X", X, ndim=1)
        require(measured.size > 0, "X: need at least one measured decay constant")
        measured = np.sort(measured)[::-1]
        tolerance = self.tolerance
        if tolerance is None:
            tolerance = 1e-9 * float(np.max(measured))
        report = run_imaging(
            self.grid, self.eta_background, self.eta_inclusion, measured,
            tolerance, candidate_family=self.candidate_family,
            block_size=self.block_size, n_constants=self.n_constants,
            n_threads=self.n_threads,
        )
        self.report_ = report
        self.inner_mask_ = report.bounds.inner
        self.outer_mask_ = report.bounds.outer
        self.occupancy_ = occupancy_grid(self.grid, report.bounds)
        return self

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).occupancy_
