"""Inclusion imaging from measured decay constants via monotonicity tests.

A two-valued resistivity with a larger inclusion region decays faster mode
by mode: A subset of B implies tau_n(B) <= tau_n(A) for every n. Each
candidate region is therefore tested for consistency with "candidate inside
the inclusion" (outer bound) and, through its complement configuration, for
a certificate that it meets the inclusion (inner bound). Both tests are
one-sided: the union of consistent candidates contains the true inclusion,
while certificates are conclusive but may be empty, since the converse direction
carries no guarantee.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import build_operator_pair
from .errors import InconclusiveError, ValidationError
from .grid import InclusionMask, PlateGrid, mask_to_resistivity
from .modes import solve_modes
from .validation import as_float_array, require, require_int, require_positive

__all__ = [
    "MPTestResult",
    "InclusionBounds",
    "CandidateOutcome",
    "ImagingReport",
    "TauPredictor",
    "predicted_taus",
    "mp_test",
    "reconstruct_bounds",
    "run_imaging",
    "occupancy_grid",
]

#: Hard cap on how many leading time constants any test compares.
MAX_COMPARED = 10


@dataclass
class MPTestResult:
    """Outcome of one monotonicity consistency test.

    ``margin`` is the most-violated signed gap min_n(candidate - measured);
    the test passes iff ``margin >= -tolerance``.
    """

    passes: bool
    margin: float
    n_compared: int
    candidate: InclusionMask | None = None


@dataclass
class InclusionBounds:
    """Inner and outer cell-set bounds on the unknown inclusion."""

    inner: InclusionMask
    outer: InclusionMask

    def __post_init__(self) -> None:
        if not self.inner.issubset(self.outer):
            raise ValidationError("inner bound must be contained in the outer bound")


@dataclass
class CandidateOutcome:
    """Audit record for one candidate region."""

    candidate: InclusionMask
    outer_test: MPTestResult
    complement_test: MPTestResult
    certifies: bool  # complement test rejected -> candidate meets the inclusion


@dataclass
class ImagingReport:
    """Bounds plus the full per-candidate audit trail."""

    bounds: InclusionBounds
    outcomes: list[CandidateOutcome]
    tolerance: float
    n_constants: int
    diagnostic: str | None = None

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "n_constants": self.n_constants,
            "diagnostic": self.diagnostic,
            "inner_cells": self.bounds.inner.indices().tolist(),
            "outer_cells": self.bounds.outer.indices().tolist(),
            "candidates": [
                {
                    "cells": oc.candidate.indices().tolist(),
                    "passes": bool(oc.outer_test.passes),
                    "margin": float(oc.outer_test.margin),
                    "complement_margin": float(oc.complement_test.margin),
                    "certifies_inner": bool(oc.certifies),
                }
                for oc in self.outcomes
            ],
        }


class TauPredictor:
    """Forward map from candidate masks to decay constants, memoized.

    The inductance operator depends only on geometry and is assembled once;
    per-candidate resistance assembly and eigensolves are cached by the mask's
    cell pattern.
    """

    def __init__(self, grid: PlateGrid, eta_bg: float, eta_inc: float):
        self.grid = grid
        self.eta_bg = require_positive("eta_bg", eta_bg)
        self.eta_inc = require_positive("eta_inc", eta_inc)
        require(eta_inc != eta_bg, "eta_inc must differ from eta_bg")
        self._cache: dict[bytes, np.ndarray] = {}

    def taus(self, candidate: InclusionMask) -> np.ndarray:
        key = candidate.key()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        eta = mask_to_resistivity(self.grid, candidate, self.eta_bg, self.eta_inc)
        result = solve_modes(build_operator_pair(self.grid, eta)).taus
        self._cache[key] = result
        return result


_PREDICTORS: dict[tuple, TauPredictor] = {}
_PREDICTORS_MAX = 16


def _predictor(grid: PlateGrid, eta_bg: float, eta_inc: float) -> TauPredictor:
    key = (grid.key(), float(eta_bg), float(eta_inc))
    found = _PREDICTORS.get(key)
    if found is None:
        if len(_PREDICTORS) >= _PREDICTORS_MAX:
            _PREDICTORS.pop(next(iter(_PREDICTORS)))
        found = TauPredictor(grid, eta_bg, eta_inc)
        _PREDICTORS[key] = found
    return found


def predicted_taus(grid: PlateGrid, eta_bg: float, eta_inc: float,
                   candidate: InclusionMask, k: int) -> np.ndarray:
    """Top-k decay constants of the two-valued candidate configuration."""
    require_int("k", k, minimum=1)
    require(k <= grid.n_cells, f"k={k} exceeds dof={grid.n_cells}")
    return _predictor(grid, eta_bg, eta_inc).taus(candidate)[:k]


def mp_test(measured_taus, candidate_taus, tolerance: float, *,
            flip: bool = False, candidate: InclusionMask | None = None,
            max_compared: int = MAX_COMPARED) -> MPTestResult:
    """One-sided consistency test between measured and candidate constants.

    Both vectors must already be sorted decreasing (solver and extractor
    output order); they are paired index-wise, truncated to the shorter list
    and to ``max_compared``. In the default orientation the candidate must
    dominate: passes iff measured_n <= candidate_n + tolerance for every
    compared n. ``flip`` reverses the inequality for inclusions less
    resistive than the background. An infinite tolerance is allowed and
    accepts every candidate.
    """
    measured = as_float_array("measured_taus", measured_taus, ndim=1)
    cand = as_float_array("candidate_taus", candidate_taus, ndim=1)
    tolerance = float(tolerance)
    if math.isnan(tolerance) or tolerance < 0.0:
        raise ValidationError(f"tolerance: expected a value >= 0, got {tolerance!r}")
    n = min(measured.size, cand.size, max_compared)
    if n == 0:
        raise InconclusiveError("nothing to compare: empty time-constant set")
    gaps = cand[:n] - measured[:n]
    if flip:
        gaps = -gaps
    margin = float(np.min(gaps))
    return MPTestResult(
        passes=bool(margin >= -tolerance),
        margin=margin,
        n_compared=int(n),
        candidate=candidate,
    )


def _enumerate_candidates(grid: PlateGrid, family: str, block_size: int) -> list[InclusionMask]:
    if family == "single-cell":
        return [InclusionMask.from_indices(grid, [c]) for c in range(grid.n_cells)]
    if family == "block":
        k = require_int("block_size", block_size, minimum=1)
        require(k <= grid.nx and k <= grid.ny, f"{k}x{k} blocks do not fit this grid")
        masks = []
        for iy in range(grid.ny - k + 1):
            for ix in range(grid.nx - k + 1):
                cells = [
                    (iy + dy) * grid.nx + (ix + dx) for dy in range(k) for dx in range(k)
                ]
                masks.append(InclusionMask.from_indices(grid, cells))
        return masks
    raise ValidationError(f"candidate_family: expected 'single-cell' or 'block', got {family!r}")


def run_imaging(grid: PlateGrid, eta_bg: float, eta_inc: float, measured_taus,
                tolerance: float, candidate_family: str = "single-cell",
                block_size: int = 2, n_constants: int = MAX_COMPARED,
                n_threads: int = 1) -> ImagingReport:
    """Enumerate candidates, run both monotonicity tests per candidate, and
    aggregate bounds.

    Outer bound: union of candidates consistent with sitting inside the
    inclusion. Inner bound: cells certified by a rejected complement test;
    only single-cell candidates certify cell membership (a block's rejected
    complement shows the block merely meets the inclusion), so the inner
    bound stays empty for the block family unless blocks are single cells.
    The outer union is guaranteed to cover the inclusion when the true
    inclusion is a union of family members; with noisy constants that holds
    up to the tolerance.
    """
    measured = as_float_array("measured_taus", measured_taus, ndim=1)
    require(measured.size > 0, "measured_taus: empty")
    require(np.all(measured > 0.0), "measured_taus: all entries must be > 0")
    n_constants = require_int("n_constants", n_constants, minimum=1)
    n_threads = require_int("n_threads", n_threads, minimum=1)
    resistive = eta_inc > eta_bg  # flips every inequality when false

    predictor = _predictor(grid, eta_bg, eta_inc)
    candidates = _enumerate_candidates(grid, candidate_family, block_size)
    complements = [InclusionMask(grid, ~c.cells) for c in candidates]
    n_cmp = min(n_constants, MAX_COMPARED)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            cand_taus = list(pool.map(predictor.taus, candidates))
            comp_taus = list(pool.map(predictor.taus, complements))
    else:
        cand_taus = [predictor.taus(c) for c in candidates]
        comp_taus = [predictor.taus(c) for c in complements]

    outcomes = []
    for cand, comp, taus_a, taus_w in zip(candidates, complements, cand_taus, comp_taus):
        outer = mp_test(measured, taus_a, tolerance, flip=not resistive,
                        candidate=cand, max_compared=n_cmp)
        # Complement consistency asks whether the inclusion could avoid the
        # candidate entirely; the orientation is opposite to the outer test.
        comp_result = mp_test(taus_w, measured, tolerance, flip=not resistive,
                              candidate=comp, max_compared=n_cmp)
        outcomes.append(
            CandidateOutcome(
                candidate=cand,
                outer_test=outer,
                complement_test=comp_result,
                certifies=not comp_result.passes,
            )
        )

    outer_cells = np.zeros(grid.n_cells, dtype=bool)
    inner_cells = np.zeros(grid.n_cells, dtype=bool)
    for oc in outcomes:
        if oc.outer_test.passes:
            outer_cells |= oc.candidate.cells
        if oc.certifies and oc.candidate.n_active == 1:
            inner_cells |= oc.candidate.cells

    diagnostic = None
    if not outer_cells.any():
        diagnostic = (
            "all candidates failed the outer consistency test; the measured "
            "constants are incompatible with this model family at the given tolerance"
        )
    stray = inner_cells & ~outer_cells
    if stray.any():
        diagnostic = (diagnostic + "; " if diagnostic else "") + (
            f"{int(stray.sum())} certified cell(s) fell outside the outer bound "
            "and were clipped; tolerance likely smaller than the measurement error"
        )
        inner_cells &= outer_cells

    bounds = InclusionBounds(
        inner=InclusionMask(grid, inner_cells), outer=InclusionMask(grid, outer_cells)
    )
    return ImagingReport(
        bounds=bounds,
        outcomes=outcomes,
        tolerance=float(tolerance),
        n_constants=n_cmp,
        diagnostic=diagnostic,
    )


def reconstruct_bounds(grid: PlateGrid, eta_bg: float, eta_inc: float, measured_taus,
                       tolerance: float, candidate_family: str = "single-cell",
                       block_size: int = 2, n_constants: int = MAX_COMPARED,
                       n_threads: int = 1) -> InclusionBounds:
    """Inner/outer inclusion bounds; see :func:`run_imaging` for the audit form."""
    return run_imaging(
        grid, eta_bg, eta_inc, measured_taus, tolerance,
        candidate_family=candidate_family, block_size=block_size,
        n_constants=n_constants, n_threads=n_threads,
    ).bounds


def occupancy_grid(grid: PlateGrid, bounds: InclusionBounds) -> np.ndarray:
    """(ny, nx) int grid: 0 outside the outer bound, 1 undetermined, 2 certified."""
    occ = np.zeros(grid.n_cells, dtype=int)
    occ[bounds.outer.cells] = 1
    occ[bounds.inner.cells] = 2
    return occ.reshape(grid.ny, grid.nx)
