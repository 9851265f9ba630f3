"""Per-solve diagnostics and the lambda sweep.

The weak form of the steady vorticity equation, div(omega v) = 0, is tested
against gradients of localized potentials: for a smooth compactly supported
scalar ``Phi`` a steady field satisfies ``int omega v . grad(Phi) = 0``.  The
three shipped potentials are ``bump * q`` with ``q`` a translation
(``x1 - c1``), a shear (``(x1 - c1)(x2 - c2)``) or the rotation-invariant
quadratic ``|x - c|^2 / 2``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .disk_grid import DiskGrid, _check_field, build_grid
from .energy_solver import SolveResult, SolverConfig, solve
from .errors import ConfigurationError, ContractViolation
from .green_kernel import velocity_at
from .kirchhoff_routh import kr_minimize
from .patch_class import PatchConstraints, layout

DEFAULT_TEST_CENTER = (0.15, 0.35)
DEFAULT_TEST_RADIUS = 0.5
TEST_KINDS = ("rotation", "shear", "translation")


@dataclass(frozen=True)
class WeakTestField:
    """Gradient of ``bump(|x - c| / R) * q(x)``, supported in the ball B_R(c)."""

    kind: str
    center: tuple[float, float] = DEFAULT_TEST_CENTER
    radius: float = DEFAULT_TEST_RADIUS

    def __post_init__(self):
        if self.kind not in TEST_KINDS:
            raise ConfigurationError(f"unknown test field kind {self.kind!r}")
        if math.hypot(*self.center) + self.radius >= 0.9 + 1e-12:
            raise ConfigurationError("test field support must lie in |x| < 0.9")

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = x - np.asarray(self.center)
        s2 = np.einsum("ij,ij->i", d, d) / self.radius**2
        inside = s2 < 1.0
        g = np.where(inside, 1.0 - s2, 1.0)
        bump = np.where(inside, np.exp(1.0 - 1.0 / g), 0.0)
        # grad bump = bump * (-2 / (R^2 g^2)) * d
        dbump = (bump * -2.0 / (self.radius**2 * g * g))[:, None] * d
        if self.kind == "translation":
            q = d[:, 0]
            dq = np.stack([np.ones(len(d)), np.zeros(len(d))], axis=1)
        elif self.kind == "shear":
            q = d[:, 0] * d[:, 1]
            dq = d[:, ::-1]
        else:
            q = 0.5 * np.einsum("ij,ij->i", d, d)
            dq = d
        return bump[:, None] * dq + q[:, None] * dbump


def default_test_fields(center=DEFAULT_TEST_CENTER, radius=DEFAULT_TEST_RADIUS):
    return tuple(WeakTestField(k, tuple(center), radius) for k in TEST_KINDS)


def centroid(grid: DiskGrid, omega_i, kappa_i: float) -> tuple[float, float]:
    """(1/kappa_i) * int x omega_i, correctly rounded."""
    w = _check_field(grid, omega_i)
    if kappa_i == 0:
        raise ContractViolation("centroid of a patch with zero mass")
    wa = w * grid.areas
    return (math.fsum(grid.centers[:, 0] * wa) / kappa_i,
            math.fsum(grid.centers[:, 1] * wa) / kappa_i)


def support_diameter(grid: DiskGrid, omega_i) -> float:
    """Largest distance between active cell centres plus one cell diagonal."""
    w = _check_field(grid, omega_i)
    act = np.flatnonzero(w)
    if len(act) == 0:
        raise ContractViolation("empty support")
    diag = grid.h * math.sqrt(2.0)
    if len(act) == 1:
        return diag
    return float(pdist(grid.centers[act]).max()) + diag


def weak_residual(grid: DiskGrid, omega, test_fields=None, kappa: float | None = None):
    """|int omega v . xi| / (kappa^2 max|xi|) for each test field ``xi``."""
    w = np.asarray(getattr(omega, "omega", omega), dtype=float)
    w = _check_field(grid, w)
    test_fields = default_test_fields() if test_fields is None else test_fields
    act = np.flatnonzero(w)
    if len(act) == 0:
        return tuple(0.0 for _ in test_fields)
    if kappa is None:
        kappa = max(math.fsum(np.clip(w, 0, None) * grid.areas),
                    math.fsum(np.clip(-w, 0, None) * grid.areas))
    v = velocity_at(grid, w, grid.centers[act])
    out = []
    for xi in test_fields:
        vals = xi(grid.centers[act])
        scale = np.hypot(*xi(grid.centers).T).max()
        r = math.fsum(w[act] * grid.areas[act] * np.einsum("ij,ij->i", v, vals))
        out.append(abs(r) / (kappa * kappa * scale))
    return tuple(out)


def reference_points(constraints: PatchConstraints):
    """Kirchhoff-Routh minimizers the patches should approach."""
    crit = kr_minimize(constraints.gamma, constraints.kappa1)
    return (0.0, crit.rho1), (0.0, -crit.rho2)


def psi_bound_check(result: SolveResult) -> tuple[bool, float, float]:
    """max psi off B1 <= mu and min psi off B2 >= -mu2."""
    b1, b2 = layout(result.grid, result.constraints).ball_cells
    psi = result.psi.values
    off1 = np.ones(len(psi), dtype=bool)
    off1[b1] = False
    off2 = np.ones(len(psi), dtype=bool)
    off2[b2] = False
    hi, lo = float(psi[off1].max()), float(psi[off2].min())
    return (hi <= result.mu and lo >= -result.mu2), hi, lo


def confined(result: SolveResult) -> bool:
    """True if no active cell is a boundary cell of its support ball."""
    g, c = result.grid, result.constraints
    w = result.omega.omega
    for ball in (c.ball1, c.ball2):
        if np.any(w[g.ball_boundary_cells(ball)] != 0):
            return False
    return True


@dataclass
class SolveReport:
    lam: float
    epsilon: float
    energy: float
    mu: float
    mu2: float
    centroid1: tuple[float, float]
    centroid2: tuple[float, float]
    diam1: float
    diam2: float
    centroid_err1: float
    centroid_err2: float
    weak_residuals: tuple[float, ...]
    iterations: int
    converged: bool
    n: int
    wall_time: float = 0.0

    @property
    def diam_over_eps(self) -> tuple[float, float]:
        return self.diam1 / self.epsilon, self.diam2 / self.epsilon


def make_report(result: SolveResult, test_fields=None) -> SolveReport:
    g, c = result.grid, result.constraints
    w1, w2 = result.omega.omega1, result.omega.omega2
    c1 = centroid(g, w1, c.kappa1)
    c2 = centroid(g, w2, c.kappa2)
    p1, p2 = reference_points(c)
    return SolveReport(
        lam=c.lam,
        epsilon=math.sqrt(c.kappa1 / (c.lam * math.pi)),
        energy=result.energy,
        mu=result.mu,
        mu2=result.mu2,
        centroid1=c1,
        centroid2=c2,
        diam1=support_diameter(g, w1),
        diam2=support_diameter(g, w2),
        centroid_err1=math.hypot(c1[0] - p1[0], c1[1] - p1[1]),
        centroid_err2=math.hypot(c2[0] - p2[0], c2[1] - p2[1]),
        weak_residuals=weak_residual(g, result.omega.omega, test_fields,
                                     max(c.kappa1, -c.kappa2)),
        iterations=result.iterations,
        converged=result.converged,
        n=g.n,
        wall_time=result.wall_time,
    )


@dataclass
class SweepFit:
    mu_slope: float
    mu_intercept: float
    energy_slope: float
    energy_intercept: float
    diam_ratio_max: float
    used: int
    flagged: list[float] = field(default_factory=list)


def fit_sweep(reports: list[SolveReport]) -> SweepFit:
    """Least-squares lines mu ~ a ln(lambda) + b and E ~ c ln(lambda) + d."""
    ok = [r for r in reports if r.converged]
    flagged = [r.lam for r in reports if not r.converged]
    if len(ok) < 4:
        raise ContractViolation(f"need >= 4 converged solves to fit, have {len(ok)}")
    x = np.log([r.lam for r in ok])
    a, b = np.polyfit(x, [r.mu for r in ok], 1)
    c, d = np.polyfit(x, [r.energy for r in ok], 1)
    dmax = max(max(r.diam_over_eps) for r in ok)
    return SweepFit(float(a), float(b), float(c), float(d), float(dmax), len(ok), flagged)


def worker_count() -> int:
    raw = os.environ.get("VPL_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"VPL_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigurationError("VPL_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def make_constraints(kappa: float, lam: float, klass: str = "symmetric",
                     kappa2: float | None = None, delta: float | None = None) -> PatchConstraints:
    if klass == "symmetric":
        if kappa2 is not None and kappa2 != -kappa:
            raise ConfigurationError("symmetric class requires kappa2 = -kappa")
        return PatchConstraints.symmetric_default(kappa, lam, delta)
    if klass == "general":
        return PatchConstraints.general_default(kappa, -kappa if kappa2 is None else kappa2,
                                                lam, delta)
    raise ConfigurationError(f"unknown class {klass!r}")


def sweep(grid_n: int, kappa: float, lambdas, klass: str = "symmetric",
          kappa2: float | None = None, config: SolverConfig | None = None,
          threads: int | None = None, keep_results: bool = False):
    """Solve for each lambda (in parallel) and fit the asymptotic slopes.

    Returns ``(reports, fit)`` or, with ``keep_results``, ``(reports, fit, results)``.
    Reports are in the order of ``lambdas`` regardless of completion order.
    """
    lambdas = [float(l) for l in lambdas]
    if len(lambdas) < 4 or any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ConfigurationError("sweep needs >= 4 strictly increasing lambda values")
    grid = build_grid(grid_n)
    cons = [make_constraints(kappa, lam, klass, kappa2) for lam in lambdas]
    # build shared lookup tables before fanning out
    for c in cons:
        layout(grid, c)
    threads = worker_count() if threads is None else threads
    with ThreadPoolExecutor(max_workers=max(1, min(threads, len(cons)))) as pool:
        results = list(pool.map(lambda c: solve(grid, c, config), cons))
    reports = [make_report(r) for r in results]
    fit = fit_sweep(reports)
    if keep_results:
        return reports, fit, results
    return reports, fit
