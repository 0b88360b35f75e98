"""Loop-current grid over a thin rectangular conducting plate.

The plate is meshed into square cells of side ``pitch``. Each cell carries one
degree of freedom: a loop current circulating counterclockwise (seen from +z)
around the cell perimeter. Physical edge currents are signed differences of
the adjacent loop currents, so any DOF vector represents a divergence-free
current sheet with zero normal component on the plate boundary; both
properties hold structurally, not as constraints.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ValidationError
from .validation import as_float_array, require, require_int, require_positive

#: Vacuum permeability, SI units.
MU_0 = 4.0e-7 * np.pi

_UNIT_SYSTEMS = ("SI", "normalized")


@dataclass(frozen=True)
class PlateGrid:
    """Uniform grid of ``nx`` x ``ny`` square cells on a plate of given thickness.

    Cells are indexed row-major: ``cell = iy * nx + ix``. The plate footprint is
    ``[origin_x, origin_x + nx*pitch] x [origin_y, origin_y + ny*pitch]`` and the
    plate volume spans ``|z| <= thickness/2`` around the filament plane z = 0.

    Edges are indexed x-directed first (``nx*(ny+1)`` of them, row-major by
    ``iy`` then ``ix``), then y-directed (``ny*(nx+1)``, row-major by ``iy``
    then ``ix``). Instances are frozen and hashable so they can key caches.
    """

    nx: int
    ny: int
    pitch: float
    thickness: float
    origin: tuple[float, float] = (0.0, 0.0)
    unit_system: str = "SI"

    def __post_init__(self) -> None:
        require_int("nx", self.nx, minimum=1)
        require_int("ny", self.ny, minimum=1)
        require_positive("pitch", self.pitch)
        require_positive("thickness", self.thickness)
        require(
            self.unit_system in _UNIT_SYSTEMS,
            f"unit_system: expected one of {_UNIT_SYSTEMS}, got {self.unit_system!r}",
        )
        org = tuple(float(v) for v in self.origin)
        require(len(org) == 2 and all(np.isfinite(org)), "origin: expected two finite floats")
        object.__setattr__(self, "origin", org)

    # ---- sizes -----------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_edges_x(self) -> int:
        return self.nx * (self.ny + 1)

    @property
    def n_edges_y(self) -> int:
        return self.ny * (self.nx + 1)

    @property
    def n_edges(self) -> int:
        return self.n_edges_x + self.n_edges_y

    @property
    def n_interior_edges(self) -> int:
        return self.nx * (self.ny - 1) + self.ny * (self.nx - 1)

    @property
    def mu0(self) -> float:
        return MU_0 if self.unit_system == "SI" else 1.0

    @property
    def wire_radius(self) -> float:
        """Regularization radius for coincident-filament self terms.

        0.3 pitch sits midway between the radius above which the inductance
        form loses positive definiteness on fine grids and the radius below
        which the slowest time constants drift by more than a few percent
        per grid refinement.
        """
        return 0.3 * self.pitch

    # ---- geometry --------------------------------------------------------

    def cell_index(self, ix: int, iy: int) -> int:
        require(0 <= ix < self.nx and 0 <= iy < self.ny, f"cell ({ix}, {iy}) outside grid")
        return iy * self.nx + ix

    @cached_property
    def cell_centers(self) -> np.ndarray:
        """(n_cells, 3) cell-center coordinates on the filament plane z = 0."""
        x0, y0 = self.origin
        ix = np.arange(self.nx)
        iy = np.arange(self.ny)
        cx = x0 + (ix + 0.5) * self.pitch
        cy = y0 + (iy + 0.5) * self.pitch
        gx, gy = np.meshgrid(cx, cy)
        return np.column_stack([gx.ravel(), gy.ravel(), np.zeros(self.n_cells)])

    @cached_property
    def edge_endpoints(self) -> np.ndarray:
        """(n_edges, 2, 3) start/end coordinates of every edge filament.

        x-directed edges run toward +x, y-directed toward +y.
        """
        x0, y0 = self.origin
        p = self.pitch
        pts = np.zeros((self.n_edges, 2, 3))
        k = 0
        for iy in range(self.ny + 1):
            for ix in range(self.nx):
                pts[k, 0] = (x0 + ix * p, y0 + iy * p, 0.0)
                pts[k, 1] = (x0 + (ix + 1) * p, y0 + iy * p, 0.0)
                k += 1
        for iy in range(self.ny):
            for ix in range(self.nx + 1):
                pts[k, 0] = (x0 + ix * p, y0 + iy * p, 0.0)
                pts[k, 1] = (x0 + ix * p, y0 + (iy + 1) * p, 0.0)
                k += 1
        return pts

    def cell_loop(self, cell: int) -> np.ndarray:
        """(4, 3) perimeter vertices of one cell, counterclockwise from its
        lower-left corner."""
        require(0 <= cell < self.n_cells, f"cell index {cell} outside grid")
        iy, ix = divmod(cell, self.nx)
        x0, y0 = self.origin
        p = self.pitch
        xa, ya = x0 + ix * p, y0 + iy * p
        return np.array(
            [[xa, ya, 0.0], [xa + p, ya, 0.0], [xa + p, ya + p, 0.0], [xa, ya + p, 0.0]]
        )

    def contains_point(self, point) -> bool:
        """True if ``point`` lies inside or on the closed plate volume."""
        x, y, z = as_float_array("point", point, shape=(3,))
        x0, y0 = self.origin
        return (
            x0 <= x <= x0 + self.nx * self.pitch
            and y0 <= y <= y0 + self.ny * self.pitch
            and abs(z) <= 0.5 * self.thickness
        )

    @cached_property
    def incidence(self) -> np.ndarray:
        """Signed cell-to-edge incidence matrix, shape (n_edges, n_cells).

        Column c holds the counterclockwise loop of cell c: +1 on its bottom
        and right edges, -1 on top and left. Edge currents are ``incidence @ x``.
        """
        C = np.zeros((self.n_edges, self.n_cells))
        nx = self.nx
        nH = self.n_edges_x

        def h_edge(ix: int, iy: int) -> int:
            return iy * nx + ix

        def v_edge(ix: int, iy: int) -> int:
            return nH + iy * (nx + 1) + ix

        for iy in range(self.ny):
            for ix in range(nx):
                c = iy * nx + ix
                C[h_edge(ix, iy), c] = 1.0
                C[h_edge(ix, iy + 1), c] = -1.0
                C[v_edge(ix + 1, iy), c] = 1.0
                C[v_edge(ix, iy), c] = -1.0
        return C

    def key(self) -> tuple:
        """Hashable identity used by forward-model caches."""
        return (self.nx, self.ny, self.pitch, self.thickness, self.origin, self.unit_system)


def build_grid(
    nx: int,
    ny: int,
    pitch: float,
    thickness: float,
    origin=(0.0, 0.0),
    unit_system: str = "SI",
) -> PlateGrid:
    """Validate inputs and construct a :class:`PlateGrid`."""
    return PlateGrid(nx, ny, pitch, thickness, tuple(origin), unit_system)


def incidence_matrix(grid: PlateGrid) -> np.ndarray:
    """Return a copy of the grid's signed incidence matrix."""
    return grid.incidence.copy()


@dataclass
class InclusionMask:
    """Boolean cell subset of a grid, used as an imaging candidate or phantom."""

    grid: PlateGrid
    cells: np.ndarray  # bool, shape (n_cells,)

    def __post_init__(self) -> None:
        cells = np.asarray(self.cells)
        if cells.dtype != bool:
            raise ValidationError("InclusionMask.cells: expected a boolean array")
        if cells.shape != (self.grid.n_cells,):
            raise ValidationError(
                f"InclusionMask.cells: expected shape ({self.grid.n_cells},), got {cells.shape}"
            )
        self.cells = cells.copy()

    @classmethod
    def from_indices(cls, grid: PlateGrid, indices) -> "InclusionMask":
        idx = np.asarray(indices, dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= grid.n_cells):
            raise ValidationError("InclusionMask indices outside grid")
        cells = np.zeros(grid.n_cells, dtype=bool)
        cells[idx] = True
        return cls(grid, cells)

    @classmethod
    def empty(cls, grid: PlateGrid) -> "InclusionMask":
        return cls(grid, np.zeros(grid.n_cells, dtype=bool))

    @classmethod
    def full(cls, grid: PlateGrid) -> "InclusionMask":
        return cls(grid, np.ones(grid.n_cells, dtype=bool))

    @property
    def n_active(self) -> int:
        return int(self.cells.sum())

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.cells)

    def issubset(self, other: "InclusionMask") -> bool:
        return bool(np.all(~self.cells | other.cells))

    def key(self) -> bytes:
        return self.cells.tobytes()


@dataclass
class ResistivityMap:
    """Per-cell resistivity values on a grid; strictly positive everywhere."""

    grid: PlateGrid
    values: np.ndarray  # float, shape (n_cells,)

    def __post_init__(self) -> None:
        vals = as_float_array("ResistivityMap.values", self.values, shape=(self.grid.n_cells,))
        if np.any(vals <= 0.0):
            raise ValidationError("ResistivityMap.values: all entries must be > 0")
        self.values = vals.copy()

    @classmethod
    def uniform(cls, grid: PlateGrid, eta: float) -> "ResistivityMap":
        require_positive("eta", eta)
        return cls(grid, np.full(grid.n_cells, float(eta)))


def mask_to_resistivity(
    grid: PlateGrid, mask: InclusionMask, eta_bg: float, eta_inc: float
) -> ResistivityMap:
    """Two-valued map: ``eta_inc`` on masked cells, ``eta_bg`` elsewhere."""
    require_positive("eta_bg", eta_bg)
    require_positive("eta_inc", eta_inc)
    if mask.grid.key() != grid.key():
        raise ValidationError("mask was built for a different grid")
    values = np.where(mask.cells, float(eta_inc), float(eta_bg))
    return ResistivityMap(grid, values)
