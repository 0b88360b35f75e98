"""Time-domain responses built on the modal decomposition.

Every modal amplitude obeys a scalar RL circuit: ``r_n i_n + l_n di_n/dt =
E_n(t)`` with ``r_n = j_n.T R j_n`` (equal to 1 for an R-orthonormal basis),
``l_n = j_n.T L j_n`` (equal to tau_n), and source electromotive force
``E_n = -(j_n.T m) di_s/dt`` for a coil with coupling vector m carrying
current i_s. Free decays are evaluated in closed form; driven responses use
the per-step exact exponential update for a piecewise-linear source current,
which is a first-order IIR recursion.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .assembly import OperatorPair, SensorSet, _edge_field_factors
from .errors import ValidationError
from .grid import PlateGrid
from .modes import ModalBasis
from .validation import as_float_array, require, require_positive

__all__ = [
    "CircuitParams",
    "FreeResponse",
    "SensorTraces",
    "project_initial",
    "free_response",
    "step_off_coefficients",
    "circuit_params",
    "driven_response",
    "sensor_trace",
]


@dataclass
class CircuitParams:
    """Per-mode lumped circuit constants; ``l / r`` recovers the time constants."""

    r: np.ndarray  # modal resistances
    l: np.ndarray  # modal self-inductances
    m: np.ndarray  # modal coupling to the source coil


def circuit_params(pair: OperatorPair, basis: ModalBasis, m) -> CircuitParams:
    coupling = as_float_array("m", m, shape=(pair.dof,))
    J = basis.modes
    r = np.einsum("in,ij,jn->n", J, pair.R, J)
    l = np.einsum("in,ij,jn->n", J, pair.L, J)
    return CircuitParams(r=r, l=l, m=J.T @ coupling)


def project_initial(basis: ModalBasis, R, x0) -> np.ndarray:
    """Modal coefficients of a DOF vector: ``c = modes.T @ R @ x0``."""
    Rm = as_float_array("R", R, shape=(basis.dof, basis.dof))
    x = as_float_array("x0", x0, shape=(basis.dof,))
    return basis.modes.T @ (Rm @ x)


def free_response(basis: ModalBasis, coeffs, t):
    """Source-free decay ``sum_n c_n j_n exp(-t/tau_n)``.

    Scalar ``t`` gives a (dof,) state; an array of times gives (nt, dof).
    """
    c = as_float_array("coeffs", coeffs, shape=(basis.dof,))
    t_arr = as_float_array("t", np.atleast_1d(t))
    require(np.all(t_arr >= 0.0), "t: free response is defined for t >= 0")
    decays = np.exp(-t_arr[:, None] / basis.taus[None, :])
    out = decays * c[None, :] @ basis.modes.T
    return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out


@dataclass
class FreeResponse:
    """A frozen free decay: coefficients at release time ``t0``."""

    basis: ModalBasis
    coeffs: np.ndarray
    t0: float = 0.0

    def evaluate(self, t):
        return free_response(self.basis, self.coeffs, np.asarray(t) - self.t0)


def step_off_coefficients(pair: OperatorPair, basis: ModalBasis, m, i0: float) -> np.ndarray:
    """Modal coefficients immediately after a coil at steady current ``i0``
    switches off.

    The jump condition for ``R x + L x' = -m i_s'`` leaves ``x(0+) =
    L^{-1} m i0``, whose modal coefficients are ``(modes.T m) i0 / tau``.
    """
    coupling = as_float_array("m", m, shape=(pair.dof,))
    return (basis.modes.T @ coupling) * float(i0) / basis.taus


def _modal_driven_currents(taus: np.ndarray, m_tilde: np.ndarray, i_s: np.ndarray,
                           dt: float):
    """Exact per-step integration of every modal circuit.

    Returns modal currents at the sample instants, (K, n_modes), and the
    per-interval EMF values, (K-1, n_modes).
    """
    emf = -np.diff(i_s)[:, None] / dt * m_tilde[None, :]
    decay = np.exp(-dt / taus)
    out = np.empty((len(i_s), len(taus)))
    out[0] = 0.0
    for n, d in enumerate(decay):
        # i_{k+1} = d i_k + (1 - d) E_k: a first-order IIR filter.
        out[1:, n] = scipy.signal.lfilter([1.0 - d], [1.0, -d], emf[:, n])
    return out, emf


def driven_response(pair: OperatorPair, basis: ModalBasis, m, i_s, dt: float,
                    times=None) -> np.ndarray:
    """DOF trajectory driven by a sampled coil current, starting at rest.

    ``i_s`` holds uniform samples spaced ``dt`` apart (linear interpolation in
    between). If ``times`` is given it must match that uniform schedule.
    Returns shape (n_samples, dof).
    """
    require_positive("dt", dt)
    source = as_float_array("i_s", i_s, ndim=1)
    require(source.size >= 2, "i_s: need at least two samples")
    if times is not None:
        t = as_float_array("times", times, shape=source.shape)
        expected = t[0] + dt * np.arange(source.size)
        if np.max(np.abs(t - expected)) > 1e-9 * dt:
            raise ValidationError("times: non-uniform sampling; resample the source first")

    coupling = as_float_array("m", m, shape=(pair.dof,))
    currents, _ = _modal_driven_currents(basis.taus, basis.modes.T @ coupling, source, dt)
    return currents @ basis.modes.T


@dataclass
class SensorTraces:
    """Sampled sensor outputs of a free modal decay."""

    times: np.ndarray          # (nt,)
    probe_fields: np.ndarray   # (n_probes, nt, 3)
    fluxes: np.ndarray         # (n_loops, nt)
    voltages: np.ndarray       # (n_loops, nt), v = d(flux)/dt


def sensor_trace(grid: PlateGrid, basis: ModalBasis, coeffs, sensors: SensorSet,
                 times) -> SensorTraces:
    """Fields, pickup fluxes, and pickup voltages of a free decay.

    Flux through loop k is ``sum_n c_n (m_k.T j_n) exp(-t/tau_n)`` with m_k the
    loop's coupling vector; the voltage is its exact time derivative.
    """
    from .assembly import mutual_coupling  # deferred to keep import graph flat

    c = as_float_array("coeffs", coeffs, shape=(basis.dof,))
    t = as_float_array("times", times, ndim=1)
    require(np.all(t >= 0.0), "times: free response is defined for t >= 0")
    sensors.validate_against(grid)

    decays = np.exp(-t[None, :] / basis.taus[:, None]) * c[:, None]  # (n_modes, nt)

    edge_currents = grid.incidence @ basis.modes  # (n_edges, n_modes)
    probe_fields = np.zeros((len(sensors.probes), t.size, 3))
    for i, probe in enumerate(sensors.probes):
        factors = _edge_field_factors(grid, probe)      # (n_edges, 3)
        per_mode = factors.T @ edge_currents            # (3, n_modes)
        probe_fields[i] = (per_mode @ decays).T

    n_loops = len(sensors.pickup_loops)
    fluxes = np.zeros((n_loops, t.size))
    voltages = np.zeros((n_loops, t.size))
    for k, loop in enumerate(sensors.pickup_loops):
        phi_modal = basis.modes.T @ mutual_coupling(grid, loop)  # (n_modes,)
        fluxes[k] = phi_modal @ decays
        voltages[k] = (-phi_modal / basis.taus) @ decays

    return SensorTraces(times=t, probe_fields=probe_fields, fluxes=fluxes, voltages=voltages)
