"""Shared builders for the test suite.

Heavy objects (grids, operator pairs, modal bases) are memoized so the many
property tests that share a configuration pay for assembly and eigensolves
once. Acceptance tests append one line per criterion to ACCEPTANCE_LINES;
the terminal-summary hook prints them after the run regardless of capture.
"""
from functools import lru_cache
from pathlib import Path

import numpy as np

from eddymodes import (
    MU_0,
    OperatorPair,
    ResistivityMap,
    build_grid,
    build_operator_pair,
    solve_modes,
)

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_spd_pair(dof: int, seed: int, lo: float = 0.5, hi: float = 5.0) -> OperatorPair:
    """Random symmetric positive definite operator pair, exactly symmetric."""
    rng = np.random.default_rng(seed)

    def spd():
        q, _ = np.linalg.qr(rng.standard_normal((dof, dof)))
        a = (q * rng.uniform(lo, hi, dof)) @ q.T
        return 0.5 * (a + a.T)

    return OperatorPair(L=spd(), R=spd(), dof=dof, mu0=MU_0)


@lru_cache(maxsize=32)
def uniform_pair(nx: int, ny: int, eta: float = 1.7e-8, pitch: float = 0.01,
                 thickness: float = 0.001) -> OperatorPair:
    grid = build_grid(nx, ny, pitch, thickness)
    return build_operator_pair(grid, ResistivityMap.uniform(grid, eta))


@lru_cache(maxsize=32)
def uniform_basis(nx: int, ny: int, eta: float = 1.7e-8, pitch: float = 0.01,
                  thickness: float = 0.001):
    return solve_modes(uniform_pair(nx, ny, eta, pitch, thickness))


def random_resistivity(grid, seed: int, lo: float = 1e-8, hi: float = 1e-6) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, grid.n_cells)
