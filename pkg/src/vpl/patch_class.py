"""Admissible vorticity classes on a DiskGrid.

Two classes are supported:

* symmetric: one positive patch in ``B1``, its negative mirror image in
  ``B2 = reflect_x2(B1)``; the field is even in x1 and odd in x2.
* general: a positive patch in ``B1`` and a negative patch in ``B2`` with
  independent masses; the field is even in x1.

Only the half ``x1 > 0`` of each free patch is stored.  The full field is
produced by copying through the grid's reflection maps, so the symmetry
constraints hold bitwise rather than approximately.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .disk_grid import Ball, DiskGrid, _check_field
from .errors import ConfigurationError, InfeasibleError
from .kirchhoff_routh import RHO_SYMMETRIC, kr_minimize

MASS_RTOL = 1e-12


@dataclass(frozen=True)
class PatchConstraints:
    lam: float
    kappa1: float
    kappa2: float
    ball1: Ball
    ball2: Ball
    symmetric: bool = True

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigurationError(f"lambda must be positive, got {self.lam}")
        if not (self.kappa1 > 0 > self.kappa2):
            raise ConfigurationError("need kappa1 > 0 > kappa2")
        for b in (self.ball1, self.ball2):
            if b.center[0] != 0.0:
                raise ConfigurationError("support balls must be centred on the x2 axis")
        c1, c2 = np.asarray(self.ball1.center), np.asarray(self.ball2.center)
        if np.hypot(*(c1 - c2)) <= self.ball1.radius + self.ball2.radius:
            raise ConfigurationError("support balls must have disjoint closures")
        if self.lam * self.ball1.area <= self.kappa1 or self.lam * self.ball2.area <= -self.kappa2:
            raise ConfigurationError(
                f"class is empty: lambda={self.lam} too small for the ball areas")
        if self.symmetric:
            mirror = Ball((c1[0], -c1[1]), self.ball1.radius)
            if self.kappa2 != -self.kappa1 or self.ball2 != mirror:
                raise ConfigurationError(
                    "symmetric class needs kappa2 = -kappa1 and ball2 = mirror of ball1")

    @property
    def kappa(self) -> float:
        return self.kappa1

    @property
    def gamma(self) -> float:
        return -self.kappa2 / self.kappa1

    @classmethod
    def symmetric_default(cls, kappa: float, lam: float, delta: float | None = None):
        """Balls of radius rho*/2 about (0, +-rho*), rho* = sqrt(sqrt5 - 2)."""
        delta = 0.5 * RHO_SYMMETRIC if delta is None else delta
        return cls(lam, kappa, -kappa, Ball((0.0, RHO_SYMMETRIC), delta),
                   Ball((0.0, -RHO_SYMMETRIC), delta), True)

    @classmethod
    def general_default(cls, kappa1: float, kappa2: float, lam: float,
                        delta: float | None = None):
        """Balls about the Kirchhoff-Routh minimizers (0, p), (0, q)."""
        crit = kr_minimize(-kappa2 / kappa1, kappa1)
        p, q = crit.rho1, -crit.rho2
        if delta is None:
            delta = 0.5 * min(1.0 - p, 1.0 + q, 0.5 * (p - q))
        return cls(lam, kappa1, kappa2, Ball((0.0, p), delta), Ball((0.0, q), delta), False)


@dataclass(frozen=True, eq=False)
class _FreePatch:
    """Stored half of one independent patch."""

    cells: np.ndarray      # B_k cells with x1 > 0, ascending index
    sign: float            # +1 for the positive patch, -1 for the negative one
    target: float          # stored-half mass, |kappa_k| / 2


@dataclass(frozen=True, eq=False)
class Layout:
    grid: DiskGrid
    constraints: PatchConstraints
    free: tuple[_FreePatch, ...]
    ball_cells: tuple[np.ndarray, np.ndarray] = field(repr=False)

    @property
    def stored_cells(self) -> np.ndarray:
        return np.concatenate([fp.cells for fp in self.free])

    def expand(self, stored_values: list[np.ndarray]) -> np.ndarray:
        """Full cell field from per-free-patch stored values (signed)."""
        g = self.grid
        omega = np.zeros(g.size)
        for fp, u in zip(self.free, stored_values):
            w = fp.sign * np.asarray(u, dtype=float)
            omega[fp.cells] = w
            omega[g.reflect_x1[fp.cells]] = w
            if self.constraints.symmetric:
                omega[g.reflect_x2[fp.cells]] = -w
                omega[g.reflect_x2[g.reflect_x1[fp.cells]]] = -w
        return omega


def layout(grid: DiskGrid, constraints: PatchConstraints) -> Layout:
    key = ("layout", constraints)
    if key in grid._cache:
        return grid._cache[key]
    b1 = grid.inside_ball(constraints.ball1)
    b2 = grid.inside_ball(constraints.ball2)
    x1 = grid.centers[:, 0]
    free = [_FreePatch(b1[x1[b1] > 0], 1.0, 0.5 * constraints.kappa1)]
    if not constraints.symmetric:
        free.append(_FreePatch(b2[x1[b2] > 0], -1.0, -0.5 * constraints.kappa2))
    lay = Layout(grid, constraints, tuple(free), (b1, b2))
    grid._cache[key] = lay
    return lay


@dataclass(frozen=True, eq=False)
class PatchField:
    omega: np.ndarray
    constraints: PatchConstraints
    grid: DiskGrid
    fractional: tuple[int, ...] = ()

    def __post_init__(self):
        self.omega.setflags(write=False)

    def part(self, k: int) -> np.ndarray:
        """Field restricted to ball ``k`` (1 or 2)."""
        cells = layout(self.grid, self.constraints).ball_cells[k - 1]
        out = np.zeros(self.grid.size)
        out[cells] = self.omega[cells]
        return out

    @property
    def omega1(self) -> np.ndarray:
        return self.part(1)

    @property
    def omega2(self) -> np.ndarray:
        return self.part(2)

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.omega)


def fill_order(scores: np.ndarray, cells: np.ndarray, grid: DiskGrid) -> np.ndarray:
    """Positions into ``cells`` sorted by score desc, then |x2| desc, then index asc."""
    x2 = np.abs(grid.centers[cells, 1])
    return np.lexsort((cells, -x2, -np.asarray(scores, dtype=float)))


def fill(order_cells: np.ndarray, areas: np.ndarray, target: float, lam: float):
    """Fill cells in the given order with ``lam`` until ``target`` mass is reached.

    Returns ``(values, n_full, frac_position)``: ``values`` aligned with
    ``order_cells``; the cell at ``frac_position`` (or None) takes the
    remainder.
    """
    a = areas[order_cells]
    cum = np.cumsum(lam * a)
    if len(cum) == 0 or cum[-1] < target * (1.0 - MASS_RTOL):
        cap = cum[-1] if len(cum) else 0.0
        raise InfeasibleError(f"mass {target} unreachable: capacity is {cap}")
    m = int(np.searchsorted(cum, target, side="right"))
    values = np.zeros(len(order_cells))
    values[:m] = lam
    rem = target - (cum[m - 1] if m else 0.0)
    frac = None
    if m < len(order_cells) and rem > 0.0:
        values[m] = min(rem / a[m], lam)
        frac = m
    return values, m, frac


def _assemble(grid, constraints, per_patch_scores) -> PatchField:
    lay = layout(grid, constraints)
    stored, fracs = [], []
    for fp, score in zip(lay.free, per_patch_scores):
        order = fill_order(score, fp.cells, grid)
        vals, _, frac = fill(fp.cells[order], grid.areas, fp.target, constraints.lam)
        u = np.zeros(len(fp.cells))
        u[order] = vals
        stored.append(u)
        if frac is not None:
            fracs.append(int(fp.cells[order[frac]]))
    return PatchField(lay.expand(stored), constraints, grid, tuple(fracs))


def initial_patch(constraints: PatchConstraints, grid: DiskGrid) -> PatchField:
    """Cells nearest each ball centre, filled to the prescribed mass."""
    lay = layout(grid, constraints)
    for fp in lay.free:
        if constraints.lam * grid.areas[fp.cells].sum() <= fp.target:
            raise ConfigurationError("class is empty on this grid: too few cells in the ball")
    centers = [constraints.ball1.center, constraints.ball2.center]
    scores = [-np.hypot(*(grid.centers[fp.cells] - np.asarray(c)).T)
              for fp, c in zip(lay.free, centers)]
    return _assemble(grid, constraints, scores)


def make_feasible(grid: DiskGrid, raw, constraints: PatchConstraints) -> PatchField:
    """Project ``raw`` onto the class.

    Stored-half values are clipped into ``[0, lam]`` (after applying the patch
    sign) and used as fill priorities: the highest receive ``lam`` until the
    mass is met, with one fractional cell per stored half.
    """
    raw = _check_field(grid, raw)
    lay = layout(grid, constraints)
    scores = [np.clip(fp.sign * raw[fp.cells], 0.0, constraints.lam) for fp in lay.free]
    return _assemble(grid, constraints, scores)


def validate(grid: DiskGrid, omega, constraints: PatchConstraints) -> tuple[bool, str | None]:
    """Check class membership; returns ``(ok, first violated clause)``."""
    w = np.asarray(omega.omega if isinstance(omega, PatchField) else omega, dtype=float)
    if w.shape != (grid.size,):
        return False, f"shape {w.shape} does not match grid"
    lay = layout(grid, constraints)
    b1, b2 = lay.ball_cells
    outside = np.ones(grid.size, dtype=bool)
    outside[b1] = outside[b2] = False
    if np.any(w[outside] != 0):
        return False, "support: nonzero vorticity outside B1 and B2"
    lam = constraints.lam
    if np.any(w[b1] < 0) or np.any(w[b1] > lam):
        return False, "bound: omega not in [0, lambda] on B1"
    if np.any(w[b2] > 0) or np.any(w[b2] < -lam):
        return False, "bound: omega not in [-lambda, 0] on B2"
    for cells, kappa, name in ((b1, constraints.kappa1, "B1"), (b2, constraints.kappa2, "B2")):
        m = math.fsum(w[cells] * grid.areas[cells])
        if abs(m - kappa) > MASS_RTOL * abs(kappa):
            return False, f"mass: integral over {name} is {m!r}, expected {kappa!r}"
    if not np.array_equal(w, w[grid.reflect_x1]):
        return False, "symmetry: omega not even in x1"
    if constraints.symmetric and not np.array_equal(w, -w[grid.reflect_x2]):
        return False, "symmetry: omega not odd in x2"
    return True, None
