"""Generalized eigensolve of the operator pencil and its variational checks.

The independent oracle reduces L j = tau R j by an explicit Cholesky
whitening written out here (factor R, congruence-transform L, ordinary
symmetric eigensolve) rather than calling the packaged generalized driver.
"""
import numpy as np
import pytest

from conftest import random_spd_pair, uniform_pair

from eddymodes import (
    ConvergenceError,
    DefinitenessError,
    ModalBasis,
    MU_0,
    OperatorPair,
    ValidationError,
    rayleigh_quotient,
    solve_modes,
    verify_minmax,
)


def whitening_oracle_taus(L: np.ndarray, R: np.ndarray) -> np.ndarray:
    G = np.linalg.cholesky(R)
    A = np.linalg.solve(G, np.linalg.solve(G, L).T).T  # G^-1 L G^-T
    A = 0.5 * (A + A.T)
    return np.sort(np.linalg.eigvalsh(A))[::-1]


# ---------------------------------------------------------------------------
# Pinned small problems
# ---------------------------------------------------------------------------


def test_scalar_problem():
    basis = solve_modes(OperatorPair(L=np.array([[2.0]]), R=np.array([[4.0]]),
                                     dof=1, mu0=MU_0))
    # normalization j.T R j = 1 forces |j| = 1/2; sign convention makes it +
    assert basis.taus == pytest.approx([0.5], rel=1e-15)
    assert basis.modes[0, 0] == pytest.approx(0.5, rel=1e-15)


def test_diagonal_problem():
    basis = solve_modes(OperatorPair(L=np.diag([3.0, 1.0]), R=np.eye(2),
                                     dof=2, mu0=MU_0))
    assert basis.taus == pytest.approx([3.0, 1.0], rel=1e-14)
    assert basis.modes == pytest.approx(np.eye(2), abs=1e-14)


def test_matches_whitening_oracle():
    pair = random_spd_pair(5, seed=123)
    basis = solve_modes(pair)
    ref = whitening_oracle_taus(pair.L, pair.R)
    assert np.allclose(basis.taus, ref, rtol=1e-10)


# ---------------------------------------------------------------------------
# Structural invariants
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("dof,seed", [(2, 0), (5, 1), (9, 2), (12, 3)])
def test_modal_structure_random_pairs(dof, seed):
    pair = random_spd_pair(dof, seed)
    basis = solve_modes(pair)
    J = basis.modes
    assert np.all(basis.taus > 0.0)
    assert np.all(np.diff(basis.taus) <= 0.0)
    assert np.max(np.abs(J.T @ pair.R @ J - np.eye(dof))) <= 1e-10
    assert np.max(np.abs(J.T @ pair.L @ J - np.diag(basis.taus))) <= 1e-10 * basis.taus[0]
    residual = pair.L @ J - pair.R @ J * basis.taus[None, :]
    norm = np.linalg.norm(pair.L @ J, axis=0)
    assert np.max(np.linalg.norm(residual, axis=0) / norm) <= 1e-10


def test_modal_structure_grid_pair():
    pair = uniform_pair(4, 3)
    basis = solve_modes(pair)
    J = basis.modes
    assert np.max(np.abs(J.T @ pair.R @ J - np.eye(pair.dof))) <= 1e-10
    assert np.max(np.abs(J.T @ pair.L @ J - np.diag(basis.taus))) <= 1e-10 * basis.taus[0]


def test_sign_convention():
    basis = solve_modes(random_spd_pair(7, seed=4))
    idx = np.argmax(np.abs(basis.modes), axis=0)
    assert np.all(basis.modes[idx, np.arange(7)] > 0.0)


def test_spectrum_invariant_under_dof_permutation():
    pair = random_spd_pair(6, seed=8)
    rng = np.random.default_rng(8)
    perm = rng.permutation(6)
    P = np.eye(6)[perm]
    permuted = OperatorPair(L=P @ pair.L @ P.T, R=P @ pair.R @ P.T, dof=6, mu0=MU_0)
    a = solve_modes(pair)
    b = solve_modes(permuted)
    assert np.allclose(b.taus, a.taus, rtol=1e-12)
    assert np.allclose(b.modes, P @ a.modes, atol=1e-10)


def test_homogeneity_in_resistance_scale():
    pair = random_spd_pair(6, seed=9)
    for c in (0.5, 2.0, 10.0):
        scaled = OperatorPair(L=pair.L, R=c * pair.R, dof=6, mu0=MU_0)
        a = solve_modes(pair)
        b = solve_modes(scaled)
        assert np.allclose(b.taus, a.taus / c, rtol=1e-12)
        # same directions, renormalized against the scaled weight
        assert np.allclose(b.modes * np.sqrt(c), a.modes, rtol=0, atol=1e-10)


# ---------------------------------------------------------------------------
# Rayleigh quotient and variational characterizations
# ---------------------------------------------------------------------------


def test_rayleigh_on_modes_returns_taus():
    pair = random_spd_pair(6, seed=10)
    basis = solve_modes(pair)
    for n in range(6):
        rq = rayleigh_quotient(pair, basis.modes[:, n])
        assert rq == pytest.approx(basis.taus[n], rel=1e-12)


def test_rayleigh_scale_invariance_and_zero_rejection():
    pair = random_spd_pair(4, seed=11)
    v = np.array([1.0, -2.0, 0.5, 3.0])
    assert rayleigh_quotient(pair, 7.5 * v) == pytest.approx(
        rayleigh_quotient(pair, v), rel=1e-14)
    with pytest.raises(ValidationError):
        rayleigh_quotient(pair, np.zeros(4))


def test_rayleigh_two_mode_combination_is_bracketed():
    pair = random_spd_pair(6, seed=12)
    basis = solve_modes(pair)
    v = basis.modes[:, 0] + basis.modes[:, 1]
    rq = rayleigh_quotient(pair, v)
    assert basis.taus[1] - 1e-12 <= rq <= basis.taus[0] + 1e-12


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_restricted_minimum_over_leading_span(seed):
    """The smallest quotient over the span of the n leading modes is the n-th
    time constant."""
    pair = random_spd_pair(6, seed)
    basis = solve_modes(pair)
    for n in range(1, 7):
        U = basis.modes[:, :n]
        vals = whitening_oracle_taus(U.T @ pair.L @ U, U.T @ pair.R @ U)
        assert vals[-1] == pytest.approx(basis.taus[n - 1], rel=1e-10)
        # random vectors in the span can only do worse
        rng = np.random.default_rng(seed + 40)
        for _ in range(20):
            v = U @ rng.standard_normal(n)
            assert rayleigh_quotient(pair, v) >= basis.taus[n - 1] - 1e-10 * basis.taus[0]


def test_minmax_certificate_interior_index():
    pair = random_spd_pair(6, seed=13)
    basis = solve_modes(pair)
    cert = verify_minmax(pair, n=3, trials=500, seed=21)
    assert cert.tau_n == pytest.approx(basis.taus[2], rel=1e-12)
    assert cert.lhs_max_min <= cert.tau_n + 1e-10
    assert cert.witness_value == pytest.approx(cert.tau_n, rel=1e-10)
    assert cert.witness_subspace.shape == (6, 3)


def test_minmax_certificate_extremes():
    pair = random_spd_pair(5, seed=14)
    basis = solve_modes(pair)
    first = verify_minmax(pair, n=1, trials=200, seed=3)
    assert first.lhs_max_min <= basis.taus[0] + 1e-10
    assert first.witness_value == pytest.approx(basis.taus[0], rel=1e-10)
    last = verify_minmax(pair, n=5, trials=50, seed=3)
    # an n = dof subspace is the whole space, so the minimum is the smallest tau
    assert last.lhs_max_min == pytest.approx(basis.taus[-1], rel=1e-10)


def test_minmax_input_validation():
    pair = random_spd_pair(4, seed=15)
    with pytest.raises(ValidationError):
        verify_minmax(pair, n=0)
    with pytest.raises(ValidationError):
        verify_minmax(pair, n=5)
    with pytest.raises(ValidationError):
        verify_minmax(random_spd_pair(20, seed=16), n=1)  # too large for the search


# ---------------------------------------------------------------------------
# Error paths and serialization
# ---------------------------------------------------------------------------


def test_indefinite_weight_rejected():
    pair = OperatorPair(L=np.eye(3), R=np.diag([1.0, -1.0, 1.0]), dof=3, mu0=MU_0)
    with pytest.raises(DefinitenessError):
        solve_modes(pair)


def test_indefinite_inductance_rejected():
    pair = OperatorPair(L=np.diag([1.0, -2.0]), R=np.eye(2), dof=2, mu0=MU_0)
    with pytest.raises((DefinitenessError, ConvergenceError)):
        solve_modes(pair)


def test_shape_mismatch_rejected():
    pair = OperatorPair(L=np.eye(3), R=np.eye(3), dof=4, mu0=MU_0)
    with pytest.raises(ValidationError):
        solve_modes(pair)


def test_basis_round_trips_through_dict():
    basis = solve_modes(random_spd_pair(4, seed=17))
    clone = ModalBasis.from_dict(basis.to_dict())
    assert np.array_equal(clone.taus, basis.taus)
    assert np.array_equal(clone.modes, basis.modes)
    assert clone.dof == basis.dof
