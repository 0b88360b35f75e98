"""Discrete resistance and inductance operators for the loop-current grid.

Resistance: each edge filament gets ``r_e = eta_e * len_e / (thickness * w_e)``
with edge resistivity averaged from the adjacent cells; the cell-loop matrix is
``R = C.T @ diag(r_e) @ C`` with ``C`` the signed incidence matrix. Since edge
length and effective width both equal the pitch, ``r_e = eta_e / thickness``.

Inductance: pairwise partial inductances of straight filaments via the Neumann
double line integral. Parallel and collinear pairs use closed forms; the
coincident self term is regularized at the grid's effective wire radius;
skew pairs (external coils) fall back to Gauss-Legendre panels.
``L = C.T @ M @ C`` is assembled from one triangle so it is exactly symmetric.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError, DefinitenessError, ValidationError
from .grid import MU_0, PlateGrid, ResistivityMap
from .validation import as_float_array, require, require_positive

__all__ = [
    "MU_0",
    "OperatorPair",
    "SensorSet",
    "assemble_resistance",
    "assemble_inductance",
    "build_operator_pair",
    "b_field",
    "mutual_coupling",
    "loop_mutual_inductance",
    "segment_mutual_inductance",
]

# Geometry tolerances are relative to segment lengths.
_PARALLEL_TOL = 1e-12
_PERP_TOL = 1e-13


def _symmetric_from_upper(x: np.ndarray) -> np.ndarray:
    # Keep one computed value per unordered pair so the result is symmetric
    # to the bit, not just to rounding.
    upper = np.triu(x)
    return upper + np.triu(x, 1).T


def _edge_resistivity(grid: PlateGrid, eta: np.ndarray) -> np.ndarray:
    """Per-edge resistivity: mean of the adjacent cells (one cell on the rim)."""
    nx, ny = grid.nx, grid.ny
    vals = eta.reshape(ny, nx)
    r = np.empty(grid.n_edges)
    k = 0
    for iy in range(ny + 1):
        for ix in range(nx):
            below = vals[iy - 1, ix] if iy > 0 else None
            above = vals[iy, ix] if iy < ny else None
            r[k] = above if below is None else below if above is None else 0.5 * (below + above)
            k += 1
    for iy in range(ny):
        for ix in range(nx + 1):
            left = vals[iy, ix - 1] if ix > 0 else None
            right = vals[iy, ix] if ix < nx else None
            r[k] = right if left is None else left if right is None else 0.5 * (left + right)
            k += 1
    return r


def _as_resistivity_values(grid: PlateGrid, eta) -> np.ndarray:
    if isinstance(eta, ResistivityMap):
        if eta.grid.key() != grid.key():
            raise ValidationError("resistivity map was built for a different grid")
        return eta.values
    if np.isscalar(eta):
        require_positive("eta", eta)
        return np.full(grid.n_cells, float(eta))
    vals = as_float_array("eta", eta, shape=(grid.n_cells,))
    if np.any(vals <= 0.0):
        raise ValidationError("eta: all entries must be > 0")
    return vals


def assemble_resistance(grid: PlateGrid, eta) -> np.ndarray:
    """Cell-loop resistance matrix ``C.T @ diag(eta_e / thickness) @ C``.

    ``eta`` may be a :class:`ResistivityMap`, a scalar, or an (n_cells,) array.
    Exactly symmetric; entries are linear in the cell resistivities.
    """
    vals = _as_resistivity_values(grid, eta)
    r_e = _edge_resistivity(grid, vals) / grid.thickness
    C = grid.incidence
    R = C.T @ (r_e[:, None] * C)
    return _symmetric_from_upper(R)


# ---------------------------------------------------------------------------
# Partial inductances
# ---------------------------------------------------------------------------


def _parallel_kernel(u: np.ndarray, d: np.ndarray) -> np.ndarray:
    # Antiderivative of the separated-axis double integral, d > 0.
    return u * np.arcsinh(u / d) - np.hypot(u, d)


def _collinear_kernel(u: np.ndarray) -> np.ndarray:
    # d -> 0 limit after the log d terms cancel between the four corners.
    a = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = a * np.log(a) - a
    return np.where(a > 0.0, val, 0.0)


def _parallel_block(starts: np.ndarray, perp: np.ndarray, length: float, radius: float,
                    mu0: float) -> np.ndarray:
    """All-pairs mutual (and regularized self) inductance of one parallel
    family of equal-length filaments.

    ``starts``: axial start coordinates; ``perp``: (n, k) transverse
    coordinates; same-direction filaments assumed.
    """
    # Equal lengths collapse the four-corner combination to three terms:
    # a2 - b2 == a1 - b1.
    a1 = starts[:, None]
    b1 = starts[None, :]
    u1 = a1 + length - b1
    u2 = a1 - b1 - length
    u3 = a1 - b1

    d = np.linalg.norm(perp[:, None, :] - perp[None, :, :], axis=-1)
    same_line = d == 0.0
    # Same-line offsets are integer multiples of the length, so a half-length
    # threshold separates i == j from touching neighbours even when rounding
    # puts |a1 - b1| one ulp below the length.
    coincident = same_line & (np.abs(a1 - b1) < 0.5 * length)
    collinear = same_line & ~coincident

    d_eff = np.where(coincident, radius, d)
    d_safe = np.where(collinear, 1.0, d_eff)
    integral = (
        _parallel_kernel(u1, d_safe)
        + _parallel_kernel(u2, d_safe)
        - 2.0 * _parallel_kernel(u3, d_safe)
    )
    integral_col = (
        _collinear_kernel(u1) + _collinear_kernel(u2) - 2.0 * _collinear_kernel(u3)
    )
    return (mu0 / (4.0 * np.pi)) * np.where(collinear, integral_col, integral)


def _edge_partial_inductance(grid: PlateGrid) -> np.ndarray:
    """Dense edge-to-edge partial inductance matrix M.

    x-directed and y-directed families are mutually perpendicular, so the
    cross block vanishes identically.
    """
    pts = grid.edge_endpoints
    nHx = grid.n_edges_x
    mu0 = grid.mu0
    p = grid.pitch
    rho = grid.wire_radius

    M = np.zeros((grid.n_edges, grid.n_edges))
    # x family: axial coordinate x, transverse (y, z)
    xs = pts[:nHx, 0, 0]
    perp_x = pts[:nHx, 0, 1:]
    M[:nHx, :nHx] = _parallel_block(xs, perp_x, p, rho, mu0)
    # y family: axial coordinate y, transverse (x, z)
    ys = pts[nHx:, 0, 1]
    perp_y = pts[nHx:, 0, ::2]
    M[nHx:, nHx:] = _parallel_block(ys, perp_y, p, rho, mu0)
    return _symmetric_from_upper(M)


_INDUCTANCE_CACHE: dict[tuple, np.ndarray] = {}
_INDUCTANCE_CACHE_MAX = 8


def assemble_inductance(grid: PlateGrid) -> np.ndarray:
    """Cell-loop inductance matrix ``C.T @ M @ C``; exactly symmetric.

    Depends only on geometry, so results are cached per grid.
    """
    key = grid.key()
    cached = _INDUCTANCE_CACHE.get(key)
    if cached is not None:
        return cached
    C = grid.incidence
    L = _symmetric_from_upper(C.T @ _edge_partial_inductance(grid) @ C)
    if len(_INDUCTANCE_CACHE) >= _INDUCTANCE_CACHE_MAX:
        _INDUCTANCE_CACHE.pop(next(iter(_INDUCTANCE_CACHE)))
    _INDUCTANCE_CACHE[key] = L
    return L


@dataclass
class OperatorPair:
    """Assembled (L, R) operators for one grid and resistivity state."""

    L: np.ndarray
    R: np.ndarray
    dof: int
    mu0: float


def _check_spd(name: str, a: np.ndarray) -> None:
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError(f"{name} is not positive definite: {exc}") from exc


def build_operator_pair(grid: PlateGrid, eta) -> OperatorPair:
    """Assemble both operators and verify positive definiteness by
    Cholesky factorization."""
    R = assemble_resistance(grid, eta)
    L = assemble_inductance(grid)
    if not (np.all(np.isfinite(L)) and np.all(np.isfinite(R))):
        raise AssemblyError("assembled operators contain non-finite entries")
    _check_spd("R", R)
    _check_spd("L", L)
    return OperatorPair(L=L, R=R, dof=grid.n_cells, mu0=grid.mu0)


# ---------------------------------------------------------------------------
# Field evaluation and external coupling
# ---------------------------------------------------------------------------


def _edge_field_factors(grid: PlateGrid, point) -> np.ndarray:
    """(n_edges, 3) flux density at ``point`` per unit current in each edge.

    Each straight filament contributes the closed-form finite-segment field
    B = mu0 i / (4 pi) * (u x a1) / |u x a1|^2 * (u.a1/|a1| - u.a2/|a2|)
    with u the unit direction and a1, a2 vectors from the endpoints to the
    field point.
    """
    pt = as_float_array("point", point, shape=(3,))
    if grid.contains_point(pt):
        raise ValidationError("field point lies inside the plate volume")

    pts = grid.edge_endpoints
    starts, ends = pts[:, 0, :], pts[:, 1, :]
    seg = ends - starts
    length = np.linalg.norm(seg, axis=1)
    u = seg / length[:, None]

    a1 = pt[None, :] - starts
    a2 = pt[None, :] - ends
    cross = np.cross(u, a1)
    cross_sq = np.einsum("ij,ij->i", cross, cross)
    n1 = np.linalg.norm(a1, axis=1)
    n2 = np.linalg.norm(a2, axis=1)

    # On the supporting line cross_sq -> 0; only an error when the point is on
    # the segment itself (the sine factor cancels the blowup otherwise).
    t = np.einsum("ij,ij->i", u, a1)
    on_line = cross_sq < (1e-14 * length**2) ** 2
    on_segment = on_line & (t > -1e-12 * length) & (t < length * (1 + 1e-12))
    if np.any(on_segment):
        raise ValidationError("field point lies on a filament segment")

    with np.errstate(divide="ignore", invalid="ignore"):
        geom = (np.einsum("ij,ij->i", u, a1) / n1 - np.einsum("ij,ij->i", u, a2) / n2)
        contrib = cross * (geom / cross_sq)[:, None]
    contrib = np.where(on_line[:, None], 0.0, contrib)
    return (grid.mu0 / (4.0 * np.pi)) * contrib


def b_field(grid: PlateGrid, dof_vector, point) -> np.ndarray:
    """Magnetic flux density at ``point`` from the edge currents of a DOF state."""
    x = as_float_array("dof_vector", dof_vector, shape=(grid.n_cells,))
    factors = _edge_field_factors(grid, point)
    return factors.T @ (grid.incidence @ x)


def _gauss_panels(p1: np.ndarray, p2: np.ndarray, n_panels: int, order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    ts = (mid[:, None] + half * nodes[None, :]).ravel()
    ws = np.tile(half * weights, n_panels)
    points = p1[None, :] + ts[:, None] * (p2 - p1)[None, :]
    return points, ws


def segment_mutual_inductance(p1, p2, q1, q2, mu0: float = MU_0,
                              radius: float | None = None) -> float:
    """Neumann partial mutual inductance of two straight filaments.

    Closed forms for parallel, collinear, and coincident (regularized at
    ``radius``) geometry; Gauss-Legendre panels otherwise. Exactly zero for
    perpendicular directions.
    """
    p1 = as_float_array("p1", p1, shape=(3,))
    p2 = as_float_array("p2", p2, shape=(3,))
    q1 = as_float_array("q1", q1, shape=(3,))
    q2 = as_float_array("q2", q2, shape=(3,))
    s1 = p2 - p1
    s2 = q2 - q1
    l1 = float(np.linalg.norm(s1))
    l2 = float(np.linalg.norm(s2))
    require(l1 > 0 and l2 > 0, "degenerate (zero-length) filament segment")
    u1 = s1 / l1
    u2 = s2 / l2
    cos_t = float(np.dot(u1, u2))

    if abs(cos_t) < _PERP_TOL:
        return 0.0

    if 1.0 - abs(cos_t) < _PARALLEL_TOL:
        sign = 1.0 if cos_t > 0 else -1.0
        # Express both segments on the common axis u1.
        a1, a2 = 0.0, l1
        b1 = float(np.dot(q1 - p1, u1))
        b2 = float(np.dot(q2 - p1, u1))
        if b2 < b1:
            b1, b2 = b2, b1
        offset = (q1 - p1) - np.dot(q1 - p1, u1) * u1
        d = float(np.linalg.norm(offset))
        scale = max(l1, l2)
        if d < 1e-12 * scale:
            overlap = min(a2, b2) - max(a1, b1)
            if overlap > 1e-12 * scale:
                if radius is None:
                    raise ValidationError(
                        "overlapping collinear filaments need a regularization radius"
                    )
                d = float(radius)
            else:
                corners = np.array([a2 - b1, a1 - b2, a1 - b1, a2 - b2])
                k = _collinear_kernel(corners)
                return sign * (mu0 / (4.0 * np.pi)) * (k[0] + k[1] - k[2] - k[3])
        corners = np.array([a2 - b1, a1 - b2, a1 - b1, a2 - b2])
        k = _parallel_kernel(corners, d)
        return sign * (mu0 / (4.0 * np.pi)) * (k[0] + k[1] - k[2] - k[3])

    # Skew pair: panel count grows as the gap closes on the segment scale.
    gap = _segment_gap(p1, p2, q1, q2)
    scale = max(l1, l2)
    n_panels = int(min(24, max(1, np.ceil(scale / max(gap, 0.05 * scale)))))
    pts1, w1 = _gauss_panels(p1, p2, n_panels, 12)
    pts2, w2 = _gauss_panels(q1, q2, n_panels, 12)
    inv_r = 1.0 / np.linalg.norm(pts1[:, None, :] - pts2[None, :, :], axis=-1)
    integral = l1 * l2 * float(w1 @ inv_r @ w2)
    return (mu0 / (4.0 * np.pi)) * cos_t * integral


def _segment_gap(p1, p2, q1, q2) -> float:
    """Minimum distance between two segments (coarse sampled; panel guide only)."""
    t = np.linspace(0.0, 1.0, 9)
    a = p1[None, :] + t[:, None] * (p2 - p1)[None, :]
    b = q1[None, :] + t[:, None] * (q2 - q1)[None, :]
    return float(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1).min())


def _validate_loop(name: str, loop) -> np.ndarray:
    arr = as_float_array(name, loop, ndim=2)
    if arr.shape[0] < 3 or arr.shape[1] != 3:
        raise ValidationError(f"{name}: expected at least 3 vertices of shape (n, 3)")
    closed = np.vstack([arr, arr[0]])
    if np.any(np.linalg.norm(np.diff(closed, axis=0), axis=1) == 0.0):
        raise ValidationError(f"{name}: consecutive vertices coincide")
    return arr


def loop_mutual_inductance(loop_a, loop_b, mu0: float = MU_0,
                           radius: float | None = None) -> float:
    """Mutual inductance of two closed polygonal loops (vertex order fixes sign)."""
    a = _validate_loop("loop_a", loop_a)
    b = _validate_loop("loop_b", loop_b)
    a_seg = list(zip(a, np.roll(a, -1, axis=0)))
    b_seg = list(zip(b, np.roll(b, -1, axis=0)))
    total = 0.0
    for p1, p2 in a_seg:
        for q1, q2 in b_seg:
            total += segment_mutual_inductance(p1, p2, q1, q2, mu0=mu0, radius=radius)
    return total


def mutual_coupling(grid: PlateGrid, loop_vertices) -> np.ndarray:
    """Mutual inductance between an external polygonal loop and every cell loop.

    Uses the same filament kernel (and coincident-filament regularization) as
    the grid inductance, so a loop that coincides with a cell perimeter
    reproduces that cell's column of L. Reciprocal by symmetry of the kernel.
    """
    loop = _validate_loop("loop_vertices", loop_vertices)
    pts = grid.edge_endpoints
    mu0 = grid.mu0
    rho = grid.wire_radius
    per_edge = np.zeros(grid.n_edges)
    for q1, q2 in zip(loop, np.roll(loop, -1, axis=0)):
        for e in range(grid.n_edges):
            per_edge[e] += segment_mutual_inductance(
                pts[e, 0], pts[e, 1], q1, q2, mu0=mu0, radius=rho
            )
    return grid.incidence.T @ per_edge


@dataclass
class SensorSet:
    """Field probes (points) and pickup loops (closed polygons) near the plate."""

    probes: np.ndarray  # (n_probes, 3)
    pickup_loops: list  # list of (m_i, 3) arrays

    def __post_init__(self) -> None:
        probes = np.asarray(self.probes, dtype=float)
        if probes.size == 0:
            probes = probes.reshape(0, 3)
        if probes.ndim != 2 or probes.shape[1] != 3 or not np.all(np.isfinite(probes)):
            raise ValidationError("SensorSet.probes: expected finite (n, 3) array")
        self.probes = probes
        self.pickup_loops = [
            _validate_loop(f"pickup_loops[{i}]", loop) for i, loop in enumerate(self.pickup_loops)
        ]

    def validate_against(self, grid: PlateGrid) -> None:
        """Every probe and every pickup vertex must sit strictly outside the
        plate volume."""
        for i, pt in enumerate(self.probes):
            if grid.contains_point(pt):
                raise ValidationError(f"probe {i} lies inside the plate volume")
        for i, loop in enumerate(self.pickup_loops):
            for pt in loop:
                if grid.contains_point(pt):
                    raise ValidationError(f"pickup loop {i} touches the plate volume")
