"""Decay modes of the symmetric-definite pencil (L, R).

The generalized eigenproblem ``L j = tau R j`` is reduced by Cholesky
whitening of R (LAPACK's symmetric-definite driver inside
``scipy.linalg.eigh``). Eigenvalues are the modal decay time constants;
eigenvectors come back R-orthonormal and L-orthogonal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import OperatorPair
from .errors import ConvergenceError, DefinitenessError, ValidationError
from .validation import as_float_array, require, require_int

__all__ = ["ModalBasis", "MinMaxCertificate", "solve_modes", "rayleigh_quotient", "verify_minmax"]


@dataclass
class ModalBasis:
    """Eigenpairs of (L, R): ``taus`` non-increasing and positive, ``modes``
    column-wise R-orthonormal with the largest-magnitude entry of each column
    made positive."""

    taus: np.ndarray   # (dof,)
    modes: np.ndarray  # (dof, dof), column n pairs with taus[n]
    dof: int

    def to_dict(self) -> dict:
        return {
            "dof": self.dof,
            "taus": self.taus.tolist(),
            "modes": self.modes.tolist(),  # row-major nested lists
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModalBasis":
        dof = require_int("dof", data["dof"], minimum=1)
        taus = as_float_array("taus", data["taus"], shape=(dof,))
        modes = as_float_array("modes", data["modes"], shape=(dof, dof))
        return cls(taus=taus, modes=modes, dof=dof)


def _fix_signs(modes: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(modes), axis=0)
    flip = np.sign(modes[idx, np.arange(modes.shape[1])])
    flip[flip == 0.0] = 1.0
    return modes * flip[None, :]


def solve_modes(pair: OperatorPair, residual_tol: float = 1e-10) -> ModalBasis:
    """Solve ``L j = tau R j`` for the full spectrum.

    Raises
    ------
    DefinitenessError
        If R fails its Cholesky factorization inside the solver.
    ConvergenceError
        If any eigenpair's relative residual exceeds ``residual_tol``.
    """
    L = np.asarray(pair.L, dtype=float)
    R = np.asarray(pair.R, dtype=float)
    require(L.shape == (pair.dof, pair.dof), "L has the wrong shape for this pair")
    require(R.shape == (pair.dof, pair.dof), "R has the wrong shape for this pair")

    try:
        w, v = scipy.linalg.eigh(L, R)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError(f"whitening factorization of R failed: {exc}") from exc

    order = np.argsort(w)[::-1]  # stable spectrum, largest time constant first
    taus = w[order]
    modes = _fix_signs(v[:, order])

    if taus[-1] <= 0.0:
        raise DefinitenessError("non-positive time constant: L is not positive definite")

    lj = L @ modes
    rj = R @ modes
    num = np.linalg.norm(lj - rj * taus[None, :], axis=0)
    den = np.linalg.norm(lj, axis=0) + taus * np.linalg.norm(rj, axis=0)
    worst = float(np.max(num / den))
    if worst > residual_tol:
        raise ConvergenceError(
            f"eigenpair residual {worst:.3e} exceeds tolerance {residual_tol:.1e}"
        )
    return ModalBasis(taus=taus, modes=modes, dof=pair.dof)


def rayleigh_quotient(pair: OperatorPair, j) -> float:
    """``(j.T L j) / (j.T R j)`` for a nonzero DOF vector."""
    vec = as_float_array("j", j, shape=(pair.dof,))
    denom = float(vec @ pair.R @ vec)
    if denom <= 0.0:
        raise ValidationError("rayleigh_quotient: vector is zero (or R-degenerate)")
    return float(vec @ pair.L @ vec) / denom


@dataclass
class MinMaxCertificate:
    """Evidence for the max-min characterization of the n-th time constant.

    ``lhs_max_min``: best (largest) subspace minimum found by random search;
    ``witness_value``: subspace minimum attained on the leading eigenvector
    span, which should equal ``tau_n``.
    """

    n: int
    tau_n: float
    lhs_max_min: float
    witness_value: float
    witness_subspace: np.ndarray  # (dof, n)
    trials: int


def _restricted_minimum(pair: OperatorPair, basis_cols: np.ndarray) -> float:
    # Smallest Rayleigh quotient over span(basis_cols), solved exactly as the
    # smallest eigenvalue of the restricted pencil.
    a = basis_cols.T @ pair.L @ basis_cols
    b = basis_cols.T @ pair.R @ basis_cols
    vals = scipy.linalg.eigh(a, b, eigvals_only=True)
    return float(vals[0])


def verify_minmax(pair: OperatorPair, n: int, trials: int = 500, seed: int = 0,
                  max_dof: int = 12) -> MinMaxCertificate:
    """Randomized check that tau_n maximizes the subspace-minimum Rayleigh
    quotient over n-dimensional trial subspaces.

    Restricted to small systems (``dof <= max_dof``) where the random search
    is meaningful. The witness subspace spans the n leading modes.
    """
    require_int("n", n, minimum=1)
    require_int("trials", trials, minimum=1)
    require(n <= pair.dof, f"n={n} exceeds dof={pair.dof}")
    require(pair.dof <= max_dof, f"randomized search limited to dof <= {max_dof}")

    basis = solve_modes(pair)
    witness = basis.modes[:, :n].copy()
    witness_value = _restricted_minimum(pair, witness)

    rng = np.random.default_rng(seed)
    best = -np.inf
    for _ in range(trials):
        q, _ = np.linalg.qr(rng.standard_normal((pair.dof, n)))
        best = max(best, _restricted_minimum(pair, q))
    best = max(best, witness_value)

    return MinMaxCertificate(
        n=n,
        tau_n=float(basis.taus[n - 1]),
        lhs_max_min=best,
        witness_value=witness_value,
        witness_subspace=witness,
        trials=trials,
    )
