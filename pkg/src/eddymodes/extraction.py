"""Recovery of decay time constants and amplitudes from sampled waveforms.

Matrix-pencil estimation: a Hankel matrix of the samples is rank-revealed by
SVD, the effective model order is chosen by a normalized singular-value
cutoff, the pencil of shifted right singular blocks yields the discrete
poles, and amplitudes follow from a Vandermonde least-squares fit.
Oscillatory or growing poles are rejected; a free MQS decay is a sum of
pure real exponentials.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ExtractionError, SignalTooShortError, ValidationError
from .validation import as_float_array, require, require_int, require_positive

__all__ = [
    "DecaySignal",
    "ExtractedSpectrum",
    "extract_time_constants",
    "truncate_by_noise",
    "merge_spectra",
]

#: Normalized singular values below this are always treated as rank noise.
SV_FLOOR = 1e-10
#: Retained amplitudes must exceed this multiple of the fit residual.
AMPLITUDE_SNR = 3.0


@dataclass
class DecaySignal:
    """Uniformly sampled waveform starting at absolute time ``t_start``."""

    samples: np.ndarray
    dt: float
    t_start: float = 0.0

    def __post_init__(self) -> None:
        self.samples = as_float_array("samples", self.samples, ndim=1)
        self.dt = require_positive("dt", self.dt)
        self.t_start = float(self.t_start)
        if self.t_start < 0.0:
            raise ValidationError("t_start: expected >= 0")


@dataclass
class ExtractedSpectrum:
    """Decay constants (decreasing) with amplitudes referenced to absolute t = 0.

    ``noise_floor`` is the rms residual of the final fit in signal units;
    ``diagnostics`` carries pencil internals used for downstream tolerances.
    """

    taus: np.ndarray
    amplitudes: np.ndarray
    noise_floor: float
    retained: int
    diagnostics: dict = field(default_factory=dict)


def _model_order(s: np.ndarray, max_order: int) -> tuple[int, float]:
    """Effective order from normalized singular values; returns (order, noise)."""
    s_norm = s / s[0]
    tail = s_norm[max_order:]
    noise_est = float(np.median(tail)) if tail.size else 0.0
    cutoff = max(SV_FLOOR, 10.0 * noise_est)
    order = int(np.sum(s_norm > cutoff))
    return min(order, max_order), noise_est


def extract_time_constants(signal: DecaySignal, max_order: int) -> ExtractedSpectrum:
    """Estimate superposed exponential decays from one sampled waveform.

    Parameters
    ----------
    signal : DecaySignal
        Uniform samples; needs at least ``2*max_order + 1`` of them.
    max_order : int
        Upper bound on the number of recovered decays.

    Raises
    ------
    SignalTooShortError
        If the Hankel pencil cannot support ``max_order`` components.
    ExtractionError
        If no real decaying pole survives, or the signal is pure noise.
    """
    require_int("max_order", max_order, minimum=1)
    y = signal.samples
    n = y.size
    if n < 2 * max_order + 1:
        raise SignalTooShortError(
            f"need at least {2 * max_order + 1} samples for order {max_order}, got {n}"
        )

    pencil = n // 3  # standard pencil parameter for decay estimation
    rows, cols = n - pencil, pencil + 1
    if min(rows, cols) < max_order + 1:
        raise SignalTooShortError(
            f"pencil rank {min(rows, cols)} cannot resolve order {max_order}"
        )

    hankel = scipy.linalg.hankel(y[:rows], y[rows - 1:])
    _, s, vh = np.linalg.svd(hankel, full_matrices=False)
    if s[0] == 0.0:
        raise ExtractionError("signal is identically zero")

    order, noise_est = _model_order(s, max_order)
    if order == 0:
        raise ExtractionError("signal is indistinguishable from noise")

    v = vh[:order, :]
    v0 = v[:, :-1].T  # (pencil, order)
    v1 = v[:, 1:].T
    poles = np.linalg.eigvals(np.linalg.pinv(v0) @ v1)

    real = np.abs(poles.imag) <= 1e-12 * (1.0 + np.abs(poles.real))
    decaying = real & (poles.real > 0.0) & (poles.real < 1.0)
    z = np.sort(poles.real[decaying])[::-1]
    if z.size == 0:
        raise ExtractionError("no admissible real decaying pole found")

    taus = -signal.dt / np.log(z)

    def _fit(z_keep: np.ndarray):
        vand = z_keep[None, :] ** np.arange(n)[:, None]
        amps, *_ = np.linalg.lstsq(vand, y, rcond=None)
        resid = y - vand @ amps
        return amps, float(np.sqrt(np.mean(resid**2)))

    amps, rms_resid = _fit(z)
    keep = np.abs(amps) > AMPLITUDE_SNR * rms_resid
    if not np.any(keep):
        raise ExtractionError("all fitted amplitudes sit below the residual floor")
    if not np.all(keep):
        z, taus = z[keep], taus[keep]
        amps, rms_resid = _fit(z)

    rms_signal = float(np.sqrt(np.mean(y**2)))
    # Reference amplitudes to absolute time zero.
    amps_abs = amps * np.exp(signal.t_start / taus)
    return ExtractedSpectrum(
        taus=taus,
        amplitudes=amps_abs,
        noise_floor=rms_resid,
        retained=int(taus.size),
        diagnostics={
            "pencil_order": int(z.size),
            "rel_residual": rms_resid / rms_signal if rms_signal else 0.0,
            "sv_noise_estimate": noise_est,
            "sv_min_retained": float(s[min(len(s), max(z.size, 1)) - 1] / s[0]),
        },
    )


def truncate_by_noise(spectrum: ExtractedSpectrum, delta: float) -> ExtractedSpectrum:
    """Drop every component with ``tau <= delta``; below the noise level the
    constants carry no information."""
    delta = require_positive("delta", delta, strict=False)
    keep = spectrum.taus > delta
    return ExtractedSpectrum(
        taus=spectrum.taus[keep],
        amplitudes=spectrum.amplitudes[keep],
        noise_floor=spectrum.noise_floor,
        retained=int(np.sum(keep)),
        diagnostics=dict(spectrum.diagnostics),
    )


def merge_spectra(spectra: list[ExtractedSpectrum], rtol: float = 0.01) -> ExtractedSpectrum:
    """Fuse per-sensor spectra by nearest-tau clustering (heuristic).

    Constants within ``rtol`` relative spacing of a cluster's leader collapse
    to their mean; the amplitude reported for a cluster is the largest in
    magnitude. There is no principled fusion rule for multi-sensor decay
    spectra; treat the output as indicative.
    """
    require(len(spectra) > 0, "merge_spectra: need at least one spectrum")
    require_positive("rtol", rtol)
    pairs = sorted(
        ((t, a) for sp in spectra for t, a in zip(sp.taus, sp.amplitudes)),
        key=lambda p: -p[0],
    )
    if not pairs:
        return ExtractedSpectrum(np.array([]), np.array([]), 0.0, 0)

    clusters: list[list[tuple[float, float]]] = [[pairs[0]]]
    for t, a in pairs[1:]:
        leader = clusters[-1][0][0]
        if (leader - t) <= rtol * leader:
            clusters[-1].append((t, a))
        else:
            clusters.append([(t, a)])

    taus = np.array([np.mean([t for t, _ in cl]) for cl in clusters])
    amps = np.array([max((a for _, a in cl), key=abs) for cl in clusters])
    return ExtractedSpectrum(
        taus=taus,
        amplitudes=amps,
        noise_floor=max(sp.noise_floor for sp in spectra),
        retained=int(taus.size),
        diagnostics={"merged_from": len(spectra)},
    )
