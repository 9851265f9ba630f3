"""Cell-centred quadrature lattice on the unit disk.

The lattice has spacing ``h = 2/n`` and is offset by ``h/2`` so that no cell
centre lies on either coordinate axis.  Both reflections ``(x1, x2) -> (-x1, x2)``
and ``(x1, x2) -> (x1, -x2)`` therefore permute the kept cells exactly, which is
what lets the symmetry constraints be imposed through index maps instead of
penalties.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractViolation, DomainError


@dataclass(frozen=True)
class Ball:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigurationError(f"ball radius must be positive, got {self.radius}")
        if math.hypot(*self.center) + self.radius >= 1.0:
            raise DomainError(f"ball {self} is not compactly contained in the unit disk")

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points strictly inside the ball."""
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        return np.hypot(d[..., 0], d[..., 1]) < self.radius

    @property
    def area(self) -> float:
        return math.pi * self.radius**2


@dataclass(frozen=True, eq=False)
class DiskGrid:
    """Cells of the clipped lattice, with reflection index maps.

    ``lookup[i, j]`` is the cell index at lattice position (column ``i``, row
    ``j``) or -1 if that lattice cell was discarded.
    """

    n: int
    h: float
    centers: np.ndarray
    areas: np.ndarray
    ij: np.ndarray
    lookup: np.ndarray
    reflect_x1: np.ndarray
    reflect_x2: np.ndarray
    quadrant_index: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return len(self.areas)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def total_area(self) -> float:
        return integrate(self, np.ones(self.size))

    def inside_ball(self, ball: Ball) -> np.ndarray:
        """Indices (ascending) of cells whose centre lies in ``ball``."""
        key = ("ball", ball)
        if key not in self._cache:
            idx = np.flatnonzero(ball.contains(self.centers))
            idx.setflags(write=False)
            self._cache[key] = idx
        return self._cache[key]

    def ball_boundary_cells(self, ball: Ball) -> np.ndarray:
        """Cells of ``ball`` having a 4-neighbour that is not in the ball."""
        inside = np.zeros(self.size + 1, dtype=bool)  # slot -1 stays False
        members = self.inside_ball(ball)
        inside[members] = True
        i, j = self.ij[members, 0], self.ij[members, 1]
        boundary = np.zeros(len(members), dtype=bool)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            ok = (ni >= 0) & (ni < self.n) & (nj >= 0) & (nj < self.n)
            nb = np.full(len(members), -1)
            nb[ok] = self.lookup[ni[ok], nj[ok]]
            boundary |= ~inside[nb]
        return members[boundary]

    def index_of(self, points: np.ndarray) -> np.ndarray:
        """Map cell centres back to cell indices; raises if a point is not a centre."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ij = np.rint((pts + 1.0) / self.h - 0.5).astype(int)
        if np.any(ij < 0) or np.any(ij >= self.n):
            raise ContractViolation("point outside the lattice")
        idx = self.lookup[ij[:, 0], ij[:, 1]]
        if np.any(idx < 0) or not np.array_equal(self.centers[idx], pts):
            raise ContractViolation("point is not a cell centre of this grid")
        return idx


def build_grid(n: int) -> DiskGrid:
    """Build the clipped, half-offset lattice with ``n`` cells per axis.

    ``n`` must be even: for odd ``n`` the half-offset puts a column of centres
    on the axis and the reflections would fix cells.
    """
    if not isinstance(n, (int, np.integer)) or n < 8:
        raise ConfigurationError(f"grid size n must be an integer >= 8, got {n!r}")
    if n % 2:
        raise ConfigurationError(f"grid size n must be even, got {n}")
    n = int(n)
    h = 2.0 / n
    coords = -1.0 + h * (np.arange(n) + 0.5)
    # coords is exactly antisymmetric: coords[n-1-k] == -coords[k]
    coords = 0.5 * (coords - coords[::-1])
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    X, Y = coords[I], coords[J]
    keep = X * X + Y * Y < 1.0
    ij = np.stack([I[keep], J[keep]], axis=1)
    centers = np.stack([X[keep], Y[keep]], axis=1)
    lookup = np.full((n, n), -1, dtype=np.int64)
    lookup[ij[:, 0], ij[:, 1]] = np.arange(len(ij))
    reflect_x1 = lookup[n - 1 - ij[:, 0], ij[:, 1]]
    reflect_x2 = lookup[ij[:, 0], n - 1 - ij[:, 1]]
    quadrant = np.flatnonzero((centers[:, 0] > 0) & (centers[:, 1] > 0))
    areas = np.full(len(ij), h * h)
    for arr in (centers, areas, ij, lookup, reflect_x1, reflect_x2, quadrant):
        arr.setflags(write=False)
    return DiskGrid(n, h, centers, areas, ij, lookup, reflect_x1, reflect_x2, quadrant)


def _check_field(grid: DiskGrid, values) -> np.ndarray:
    f = np.asarray(values, dtype=float)
    if f.shape != (grid.size,):
        raise ContractViolation(f"field has shape {f.shape}, grid has {grid.size} cells")
    return f


def integrate(grid: DiskGrid, values) -> float:
    """Midpoint-rule integral over the disk (correctly rounded sum)."""
    f = _check_field(grid, values)
    return math.fsum(f * grid.areas)


def symmetrize_even_odd(grid: DiskGrid, values) -> np.ndarray:
    """Project onto fields even in x1 and odd in x2."""
    f = _check_field(grid, values)
    r1, r2 = grid.reflect_x1, grid.reflect_x2
    q = grid.quadrant_index
    # evaluate once per orbit and copy, so the symmetries hold bitwise
    v = ((f[q] + f[r1[q]]) - (f[r2[q]] + f[r2[r1[q]]])) / 4.0
    g = np.empty_like(f)
    g[q] = v
    g[r1[q]] = v
    g[r2[q]] = -v
    g[r2[r1[q]]] = -v
    return g
