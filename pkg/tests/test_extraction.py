"""Decay-constant extraction from sampled waveforms.

All expected values come from synthetic signals generated inline with plain
numpy exponentials, so the estimator under test never touches the generator.
"""
import numpy as np
import pytest

from conftest import uniform_basis, uniform_pair

from eddymodes import (
    DecaySignal,
    ExtractedSpectrum,
    ExtractionError,
    SensorSet,
    SignalTooShortError,
    ValidationError,
    build_grid,
    extract_time_constants,
    merge_spectra,
    sensor_trace,
    solve_modes,
    step_off_coefficients,
    truncate_by_noise,
)


def multi_exp(t: np.ndarray, taus, amps) -> np.ndarray:
    return sum(a * np.exp(-t / tau) for tau, a in zip(taus, amps))


# ---------------------------------------------------------------------------
# Clean recovery
# ---------------------------------------------------------------------------


def test_single_decay_recovered():
    t = np.arange(200) * 0.005
    spectrum = extract_time_constants(DecaySignal(5.0 * np.exp(-t / 0.2), dt=0.005), 4)
    assert spectrum.retained == 1
    assert spectrum.taus == pytest.approx([0.2], rel=1e-8)
    assert spectrum.amplitudes == pytest.approx([5.0], rel=1e-8)


def test_two_mode_recovered():
    t = np.arange(400) * 0.01
    y = multi_exp(t, [1.0, 0.1], [1.0, 1.0])
    spectrum = extract_time_constants(DecaySignal(y, dt=0.01), 4)
    assert spectrum.retained == 2
    assert spectrum.taus == pytest.approx([1.0, 0.1], rel=1e-6)
    assert spectrum.amplitudes == pytest.approx([1.0, 1.0], rel=1e-6)


def test_three_mode_recovered():
    t = np.arange(600) * 0.01
    y = multi_exp(t, [1.0, 0.2, 0.04], [1.0, 1.0, 1.0])
    spectrum = extract_time_constants(DecaySignal(y, dt=0.01), 6)
    assert spectrum.retained == 3
    assert spectrum.taus == pytest.approx([1.0, 0.2, 0.04], rel=1e-6)


def test_spectrum_is_sorted_decreasing_with_diagnostics():
    t = np.arange(300) * 0.01
    y = multi_exp(t, [0.8, 0.05], [2.0, -0.7])
    spectrum = extract_time_constants(DecaySignal(y, dt=0.01), 5)
    assert np.all(np.diff(spectrum.taus) < 0.0)
    assert spectrum.noise_floor >= 0.0
    assert spectrum.diagnostics["pencil_order"] == spectrum.retained
    assert 0.0 <= spectrum.diagnostics["rel_residual"] < 1e-8


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------


def test_two_mode_noisy_60db():
    t = np.arange(400) * 0.01
    y = multi_exp(t, [1.0, 0.1], [1.0, 1.0])
    sigma = float(np.sqrt(np.mean(y**2))) * 10.0 ** (-60.0 / 20.0)
    noisy = y + np.random.default_rng(0).normal(0.0, sigma, y.size)
    spectrum = extract_time_constants(DecaySignal(noisy, dt=0.01), 4)
    assert spectrum.retained >= 2
    assert np.abs(spectrum.taus[0] - 1.0) <= 0.01
    assert np.abs(spectrum.taus[1] - 0.1) <= 0.01 * 0.1


def test_error_shrinks_with_snr():
    """Median recovery error over seeds improves monotonically from 40 to
    80 dB signal-to-noise ratio."""
    t = np.arange(400) * 0.01
    y = multi_exp(t, [1.0, 0.1], [1.0, 1.0])
    rms = float(np.sqrt(np.mean(y**2)))
    medians = []
    for snr_db in (40.0, 60.0, 80.0):
        errs = []
        for seed in range(9):
            noisy = y + np.random.default_rng(seed).normal(
                0.0, rms * 10.0 ** (-snr_db / 20.0), y.size)
            sp = extract_time_constants(DecaySignal(noisy, dt=0.01), 4)
            errs.append(abs(sp.taus[0] - 1.0))
        medians.append(np.median(errs))
    assert medians[0] > medians[1] > medians[2]


def test_pure_noise_rejected():
    rng = np.random.default_rng(3)
    with pytest.raises(ExtractionError):
        extract_time_constants(DecaySignal(rng.normal(size=120) * 1e-6, dt=0.01), 4)


def test_zero_signal_rejected():
    with pytest.raises(ExtractionError):
        extract_time_constants(DecaySignal(np.zeros(50), dt=0.01), 2)


def test_growing_signal_rejected():
    t = np.arange(100) * 0.01
    with pytest.raises(ExtractionError):
        extract_time_constants(DecaySignal(np.exp(t / 0.5), dt=0.01), 3)


def test_oscillation_rejected():
    t = np.arange(200) * 0.005
    y = np.cos(2.0 * np.pi * 3.0 * t) * np.exp(-t / 0.3)
    with pytest.raises(ExtractionError):
        extract_time_constants(DecaySignal(y, dt=0.005), 4)


def test_short_signal_rejected():
    with pytest.raises(SignalTooShortError):
        extract_time_constants(DecaySignal(np.ones(8), dt=0.01), 4)


def test_decay_signal_validation():
    with pytest.raises(ValidationError):
        DecaySignal(np.ones(10), dt=0.0)
    with pytest.raises(ValidationError):
        DecaySignal(np.ones(10), dt=0.01, t_start=-1.0)


# ---------------------------------------------------------------------------
# Time reference and truncation
# ---------------------------------------------------------------------------


def test_time_shift_leaves_taus_and_absolute_amplitudes():
    taus, amps = [0.5, 0.08], [2.0, 1.0]
    dt, n, shift = 0.004, 300, 0.1
    base = multi_exp(np.arange(n) * dt, taus, amps)
    shifted = multi_exp(shift + np.arange(n) * dt, taus, amps)
    sp0 = extract_time_constants(DecaySignal(base, dt=dt), 4)
    sp1 = extract_time_constants(DecaySignal(shifted, dt=dt, t_start=shift), 4)
    assert np.allclose(sp1.taus, sp0.taus, rtol=1e-8)
    assert np.allclose(sp1.amplitudes, sp0.amplitudes, rtol=1e-8)
    assert np.allclose(sp0.amplitudes, amps, rtol=1e-8)


def test_truncate_by_noise():
    spectrum = ExtractedSpectrum(
        taus=np.array([1.0, 0.1, 0.01]),
        amplitudes=np.array([3.0, 2.0, 1.0]),
        noise_floor=1e-9,
        retained=3,
    )
    same = truncate_by_noise(spectrum, 0.0)
    assert np.array_equal(same.taus, spectrum.taus)
    assert np.array_equal(same.amplitudes, spectrum.amplitudes)

    cut = truncate_by_noise(spectrum, 0.05)
    assert np.array_equal(cut.taus, [1.0, 0.1])
    assert np.array_equal(cut.amplitudes, [3.0, 2.0])
    assert cut.retained == 2

    empty = truncate_by_noise(spectrum, 1.0)
    assert empty.retained == 0
    assert empty.taus.size == 0

    # the boundary is inclusive: tau == delta is dropped
    edge = truncate_by_noise(spectrum, 0.1)
    assert np.array_equal(edge.taus, [1.0])


def test_merge_spectra_clusters_nearby_constants():
    a = ExtractedSpectrum(np.array([1.0, 0.5]), np.array([1.0, 0.3]), 1e-8, 2)
    b = ExtractedSpectrum(np.array([1.004, 0.2]), np.array([-2.0, 0.1]), 1e-7, 2)
    merged = merge_spectra([a, b], rtol=0.01)
    assert merged.retained == 3
    assert merged.taus == pytest.approx([1.002, 0.5, 0.2], rel=1e-12)
    assert merged.amplitudes == pytest.approx([-2.0, 0.3, 0.1])
    assert merged.noise_floor == 1e-7


def test_merge_requires_input():
    with pytest.raises(ValidationError):
        merge_spectra([])


# ---------------------------------------------------------------------------
# Round trip through the simulator
# ---------------------------------------------------------------------------


def test_round_trip_from_sensor_trace():
    """Noise-free pickup voltage of a two-cell plate yields both modal
    constants back to 1e-6."""
    grid = build_grid(2, 1, 0.01, 0.001)
    pair = uniform_pair(2, 1)
    basis = uniform_basis(2, 1)
    loop = np.array([
        [0.002, 0.001, 0.006],
        [0.014, 0.001, 0.006],
        [0.014, 0.009, 0.006],
        [0.002, 0.009, 0.006],
    ])
    sensors = SensorSet(probes=np.zeros((0, 3)), pickup_loops=[loop])
    from eddymodes import mutual_coupling

    m = mutual_coupling(grid, loop)
    c = step_off_coefficients(pair, basis, m, 1.0)
    dt = basis.taus[-1] / 40.0
    times = np.arange(240) * dt
    traces = sensor_trace(grid, basis, c, sensors, times)
    spectrum = extract_time_constants(DecaySignal(traces.voltages[0], dt=dt), 4)
    assert spectrum.retained == 2
    assert np.allclose(spectrum.taus, basis.taus, rtol=1e-6)
