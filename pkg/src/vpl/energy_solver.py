"""Energy maximization over the patch classes by iterated bathtub selection.

Each step freezes the stream function of the current iterate and replaces the
vorticity by the maximizer of the linearized energy int(psi * omega) over the
class: fill the cells of highest ``sign * psi`` with ``lambda`` until the mass
is met.  Because the discrete Green matrix is symmetric positive definite, the
energy can only increase, and the loop stops at a fixed point of the cell set.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .disk_grid import DiskGrid
from .errors import AscentViolation, ContractViolation, PatchFormError
from .green_kernel import apply_green
from .patch_class import (PatchConstraints, PatchField, fill, fill_order, initial_patch,
                          layout)

ASCENT_RTOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 500
    stability_tol: float = 0.0
    energy_tol: float = 1e-13
    translate: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class StreamField:
    values: np.ndarray
    grid: DiskGrid


@dataclass(frozen=True)
class Selection:
    cells: np.ndarray          # fully filled cells, in fill order
    frac_cell: int | None
    frac_value: float
    mu: float                  # psi (times patch sign) at the last full cell


@dataclass(eq=False)
class SolveResult:
    omega: PatchField
    psi: StreamField
    mu: float
    mu2: float
    energy: float
    iterations: int
    converged: bool
    energies: list[float] = field(default_factory=list)
    selections: list[Selection] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def constraints(self) -> PatchConstraints:
        return self.omega.constraints

    @property
    def grid(self) -> DiskGrid:
        return self.omega.grid


def _omega_array(omega) -> np.ndarray:
    return omega.omega if isinstance(omega, PatchField) else np.asarray(omega, dtype=float)


def energy(grid: DiskGrid, omega) -> float:
    """E = 1/2 sum_i psi_i omega_i a_i over active cells."""
    w = _omega_array(omega)
    active = np.flatnonzero(w)
    if len(active) == 0:
        return 0.0
    psi = apply_green(grid, w, grid.centers[active])
    return 0.5 * math.fsum(psi * w[active] * grid.areas[active])


def bathtub_select(grid: DiskGrid, psi, cells, target_mass: float, lam: float) -> Selection:
    """Fill the cells of largest ``psi`` with ``lam`` until ``target_mass``."""
    cells = np.asarray(cells)
    psi = np.asarray(psi, dtype=float)
    if psi.shape != cells.shape:
        raise ContractViolation("psi and cells must align")
    order = fill_order(psi, cells, grid)
    values, m, frac = fill(cells[order], grid.areas, target_mass, lam)
    last = order[m - 1] if m else (order[frac] if frac is not None else order[0])
    return Selection(cells[order[:m]], None if frac is None else int(cells[order[frac]]),
                     float(values[frac]) if frac is not None else 0.0, float(psi[last]))


def _step(grid, lay, omega) -> tuple[np.ndarray, list[Selection]]:
    stored = lay.stored_cells
    psi = apply_green(grid, omega, grid.centers[stored])
    per_patch, sels, start = [], [], 0
    for fp in lay.free:
        p = psi[start:start + len(fp.cells)]
        start += len(fp.cells)
        sel = bathtub_select(grid, fp.sign * p, fp.cells, fp.target, lay.constraints.lam)
        u = np.zeros(grid.size)
        u[sel.cells] = lay.constraints.lam
        if sel.frac_cell is not None:
            u[sel.frac_cell] = sel.frac_value
        per_patch.append(u[fp.cells])
        sels.append(sel)
    return lay.expand(per_patch), sels


def _translate(grid: DiskGrid, lay, omega: np.ndarray, k: int, dj: int) -> np.ndarray | None:
    """Shift free patch ``k`` rigidly by ``dj`` lattice rows in x2.

    Returns None if a shifted cell would leave the patch's ball.  All cells
    have the same area, so masses are carried over exactly.
    """
    stored = []
    for m, fp in enumerate(lay.free):
        u = fp.sign * omega[fp.cells]
        if m != k:
            stored.append(u)
            continue
        nz = np.flatnonzero(u)
        ij = grid.ij[fp.cells[nz]]
        rows = ij[:, 1] + dj
        if rows.min() < 0 or rows.max() >= grid.n:
            return None
        dst = grid.lookup[ij[:, 0], rows]
        pos = np.searchsorted(fp.cells, dst)
        pos = np.minimum(pos, len(fp.cells) - 1)
        if np.any(dst < 0) or np.any(fp.cells[pos] != dst):
            return None
        v = np.zeros(len(fp.cells))
        v[pos] = u[nz]
        stored.append(v)
    return lay.expand(stored)


def solve(grid: DiskGrid, constraints: PatchConstraints, config: SolverConfig | None = None,
          initial: PatchField | None = None) -> SolveResult:
    """Maximize the kinetic energy over the class given by ``constraints``.

    Bathtub steps run until the cell set is a fixed point.  Because a patch
    moves at most a fraction of a cell per step, a displaced patch can be
    pinned by the lattice; the solver then tries rigid one-row shifts of each
    free patch along x2, keeps the best one that raises the energy, and
    resumes bathtub steps.  Every accepted move increases the energy.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    lay = layout(grid, constraints)
    current = initial if initial is not None else initial_patch(constraints, grid)
    omega = np.array(current.omega)
    e_old = energy(grid, omega)
    energies = [e_old]
    converged = False
    it = 0
    while it < config.max_iters:
        settled = False
        while it < config.max_iters:
            it += 1
            new, _ = _step(grid, lay, omega)
            e_new = energy(grid, new)
            if e_new < e_old - ASCENT_RTOL * abs(e_old):
                raise AscentViolation(f"energy decreased at iteration {it}: {e_old!r} -> {e_new!r}")
            energies.append(e_new)
            changed = np.count_nonzero(new != omega)
            stable = changed <= config.stability_tol * max(1, np.count_nonzero(new))
            flat = e_new - e_old <= config.energy_tol * abs(e_old)
            omega, e_old = new, e_new
            if stable or flat:
                settled = True
                break
        if not settled:
            break
        if not config.translate:
            converged = True
            break
        best, e_best = None, e_old + config.energy_tol * abs(e_old)
        for k in range(len(lay.free)):
            for dj in (1, -1):
                cand = _translate(grid, lay, omega, k, dj)
                if cand is None:
                    continue
                e_c = energy(grid, cand)
                if e_c > e_best:
                    best, e_best = cand, e_c
        if best is None:
            converged = True
            break
        it += 1
        omega, e_old = best, e_best
        energies.append(e_old)
    # selections and mu come from psi of the returned iterate
    _, sels = _step(grid, lay, omega)
    fracs = tuple(s.frac_cell for s in sels if s.frac_cell is not None)
    field_ = PatchField(omega, constraints, grid, fracs)
    psi_all = apply_green(grid, omega, grid.centers)
    mu = sels[0].mu
    mu2 = sels[1].mu if len(sels) > 1 else mu
    return SolveResult(field_, StreamField(psi_all, grid), mu, mu2, e_old, it, converged,
                       energies, list(sels), time.perf_counter() - t0)


@dataclass(frozen=True)
class ThresholdProfile:
    lam: float
    mu: float
    mu2: float
    violations: int
    violations_per_patch: tuple[int, int]
    violating_cells: np.ndarray

    def f(self, t):
        """Non-decreasing profile: lam above mu, -lam below -mu2, 0 between."""
        t = np.asarray(t, dtype=float)
        return np.where(t > self.mu, self.lam, np.where(t < -self.mu2, -self.lam, 0.0))


def threshold_profile(result: SolveResult, tol: float | None = None,
                      strict: bool = True) -> ThresholdProfile:
    """Check omega = f(psi) cell by cell.

    Cells whose psi lies within ``tol`` of a threshold are not judged.  With
    ``strict`` a PatchFormError is raised when a patch has more than two
    violating cells (its mirrored fractional pair).
    """
    lam, mu, mu2 = result.constraints.lam, result.mu, result.mu2
    tol = 1e-9 * max(abs(mu), abs(mu2), 1.0) if tol is None else tol
    psi = result.psi.values
    w = result.omega.omega
    prof = ThresholdProfile(lam, mu, mu2, 0, (0, 0), np.empty(0, dtype=int))
    expected = prof.f(psi)
    ambiguous = (np.abs(psi - mu) <= tol) | (np.abs(psi + mu2) <= tol)
    bad = np.flatnonzero((w != expected) & ~ambiguous)
    b1, b2 = layout(result.grid, result.constraints).ball_cells
    in1 = np.isin(bad, b1)
    in2 = np.isin(bad, b2)
    per = (int(np.count_nonzero(in1)), int(np.count_nonzero(in2)))
    # violations outside both balls are charged to both patches
    stray = int(np.count_nonzero(~in1 & ~in2))
    per = (per[0] + stray, per[1] + stray)
    prof = ThresholdProfile(lam, mu, mu2, len(bad), per, bad)
    if strict and max(per) > 2:
        raise PatchFormError(f"omega != f(psi) on {per} cells per patch (lambda={lam})")
    return prof


def evaluate(field_: PatchField, iterations: int = 0, converged: bool = True):
    """Diagnostics of a given field without iterating.

    Returns ``(result, is_fixed_point)`` where the second item says whether one
    bathtub step reproduces the field exactly.
    """
    grid, constraints = field_.grid, field_.constraints
    lay = layout(grid, constraints)
    omega = np.array(field_.omega)
    new, sels = _step(grid, lay, omega)
    psi_all = apply_green(grid, omega, grid.centers)
    mu = sels[0].mu
    mu2 = sels[1].mu if len(sels) > 1 else mu
    e = energy(grid, omega)
    res = SolveResult(field_, StreamField(psi_all, grid), mu, mu2, e, iterations, converged,
                      [e], sels)
    return res, bool(np.array_equal(new, omega))
