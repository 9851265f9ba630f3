"""Two-vortex Kirchhoff-Routh function of the disk and its minimizers.

For circulations ``kappa1 > 0 > kappa2`` and ``gamma = -kappa2/kappa1`` the
function is invariant under rotations about the origin, so its minimizers form
a circle of antipodal configurations ``P = rho1 e``, ``Q = -rho2 e``.  Placing
the pair antipodally reduces it to

    H2 = (kappa1^2 / 2pi) ln R(rho1, rho2),
    R  = (1 + rho1 rho2)^(2 gamma) / [(rho1 + rho2)^(2 gamma) (1 - rho1^2) (1 - rho2^2)^(gamma^2)],

and the radii are found by Newton's method on the numerators of grad R.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, NumericalFailure
from .green_kernel import green, robin

RHO_SYMMETRIC = math.sqrt(math.sqrt(5.0) - 2.0)

_BOX = (0.01, 0.99)


@dataclass(frozen=True)
class KrProblem:
    kappa1: float
    kappa2: float

    def __post_init__(self):
        if not (self.kappa1 > 0 and self.kappa2 < 0):
            raise ConfigurationError(
                f"need kappa1 > 0 > kappa2, got kappa1={self.kappa1}, kappa2={self.kappa2}")

    @property
    def gamma(self) -> float:
        return -self.kappa2 / self.kappa1

    @classmethod
    def from_gamma(cls, gamma: float, kappa1: float = 1.0) -> "KrProblem":
        return cls(kappa1, -gamma * kappa1)


@dataclass(frozen=True)
class KrCritPoint:
    rho1: float
    rho2: float
    theta: float
    value: float
    residuals: tuple[float, float]
    iterations: int = 0

    @property
    def P(self) -> tuple[float, float]:
        e = _unit(self.theta)
        return (self.rho1 * e[0], self.rho1 * e[1])

    @property
    def Q(self) -> tuple[float, float]:
        e = _unit(self.theta)
        return (-self.rho2 * e[0], -self.rho2 * e[1])

    def positions(self, theta: float | None = None):
        """The pair rotated to ``theta``; every angle is a minimizer."""
        e = np.array(_unit(self.theta if theta is None else theta))
        return self.rho1 * e, -self.rho2 * e


def _unit(theta: float) -> tuple[float, float]:
    # snap so that theta = pi/2 gives a point exactly on the x2 axis
    c, s = math.cos(theta), math.sin(theta)
    return (0.0 if abs(c) < 1e-15 else c, 0.0 if abs(s) < 1e-15 else s)


def kr_energy(p: KrProblem, x, y) -> float:
    """H2(x, y) = -2 k1 k2 G(x, y) + k1^2 h(x, x) + k2^2 h(y, y)."""
    return (-2.0 * p.kappa1 * p.kappa2 * green(x, y)
            + p.kappa1**2 * robin(x) + p.kappa2**2 * robin(y))


def _check_radii(rho1, rho2):
    if not (0.0 < rho1 < 1.0 and 0.0 < rho2 < 1.0):
        raise DomainError(f"radii must lie in (0, 1), got ({rho1}, {rho2})")


def radial_objective(gamma: float, rho1: float, rho2: float) -> float:
    _check_radii(rho1, rho2)
    return math.exp(log_radial_objective(gamma, rho1, rho2))


def log_radial_objective(gamma, rho1, rho2):
    """ln R, vectorized; (kappa1^2/2pi) times this is H2 at the antipodal pair."""
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    return (2.0 * gamma * (np.log1p(rho1 * rho2) - np.log(rho1 + rho2))
            - np.log1p(-rho1 * rho1) - gamma * gamma * np.log1p(-rho2 * rho2))


def crit_system(gamma: float, rho1: float, rho2: float,
                printed: bool = False) -> tuple[float, float]:
    """Polynomials whose common zeros are the critical points of R.

    ``F1`` is the numerator of dR/drho1 and ``F2`` of dR/drho2 (after
    dividing out positive factors).  ``printed=True`` returns the commonly
    quoted form whose ``F2`` carries ``gamma^2 rho2^2`` in place of
    ``(1 + gamma) rho2^2``; it agrees with the true system only at gamma = 1
    and is kept for comparison, never used by the solver.
    """
    a, b, g = rho1, rho2, gamma
    ab, a2, b2 = a * b, a * a, b * b
    f1 = ab + (1 + g) * a2 + g * b2 + a2 * ab + (1 - g) * a2 * b2 - g
    if printed:
        f2 = g * ab + a2 + b2 + (g - 1) * a2 * b2 + g * g * b2 + g * ab * b2 - 1
    else:
        f2 = g * ab + a2 + (1 + g) * b2 + (g - 1) * a2 * b2 + g * ab * b2 - 1
    return f1, f2


def _crit_jacobian(g, a, b) -> np.ndarray:
    return np.array([
        [b + 2 * (1 + g) * a + 3 * a * a * b + 2 * (1 - g) * a * b * b,
         a + 2 * g * b + a**3 + 2 * (1 - g) * a * a * b],
        [g * b + 2 * a + 2 * (g - 1) * a * b * b + g * b**3,
         g * a + 2 * (1 + g) * b + 2 * (g - 1) * a * a * b + 3 * g * a * b * b],
    ])


def _log_r_derivatives(g, a, b):
    """Gradient and Hessian of ln R at (a, b)."""
    s, p = a + b, 1.0 + a * b
    grad = np.array([2 * g * (b / p - 1 / s) + 2 * a / (1 - a * a),
                     2 * g * (a / p - 1 / s) + 2 * g * g * b / (1 - b * b)])
    hab = 2 * g * (1 / (p * p) + 1 / (s * s))
    hess = np.array([
        [2 * g * (1 / (s * s) - b * b / (p * p)) + 2 * (1 + a * a) / (1 - a * a) ** 2, hab],
        [hab, 2 * g * (1 / (s * s) - a * a / (p * p)) + 2 * g * g * (1 + b * b) / (1 - b * b) ** 2],
    ])
    return grad, hess


def _max_step(z, step, lo, hi) -> float:
    # fraction-to-boundary: never move more than 90% of the way to the box
    t = 1.0
    for k in range(2):
        if step[k] > 0:
            t = min(t, 0.9 * (hi - z[k]) / step[k])
        elif step[k] < 0:
            t = min(t, 0.9 * (lo - z[k]) / step[k])
    return t


def newton_radii(gamma: float, start=(0.5, 0.5), tol: float = 1e-12, max_iter: int = 100):
    """Damped Newton for the common root of ``crit_system`` in (0.01, 0.99)^2.

    Far from the root the step is a regularized Newton step on ln R with an
    Armijo line search, which cannot stall away from a critical point; once
    the residual is small the iteration switches to plain damped Newton on
    (F1, F2).  Returns ``(rho, iterations)``; raises NumericalFailure if the
    residual does not drop below ``tol`` within ``max_iter`` steps.
    """
    lo, hi = _BOX
    z = np.clip(np.asarray(start, dtype=float), lo, hi)
    F = np.array(crit_system(gamma, *z))
    for it in range(1, max_iter + 1):
        if np.abs(F).max() > 1e-3:
            grad, hess = _log_r_derivatives(gamma, *z)
            eig = np.linalg.eigvalsh(hess)
            shift = max(0.0, 1e-8 - eig[0])
            step = np.linalg.solve(hess + shift * np.eye(2), -grad)
            if _max_step(z, step, lo, hi) < 0.1:
                # Newton direction runs into the box; scaled steepest descent instead
                step = -grad / (eig[1] + shift)
            f0 = float(log_radial_objective(gamma, *z))
            t = _max_step(z, step, lo, hi)
            while t > 1e-12:
                cand = z + t * step
                if float(log_radial_objective(gamma, *cand)) <= f0 + 1e-4 * t * grad @ step:
                    break
                t *= 0.5
            z = np.clip(z + t * step, lo, hi)
            F = np.array(crit_system(gamma, *z))
        else:
            try:
                step = np.linalg.solve(_crit_jacobian(gamma, *z), -F)
            except np.linalg.LinAlgError as exc:
                raise NumericalFailure(f"singular Jacobian at {z}") from exc
            norm0 = np.abs(F).max()
            t = _max_step(z, step, lo, hi)
            while True:
                cand = np.clip(z + t * step, lo, hi)
                Fc = np.array(crit_system(gamma, *cand))
                if np.abs(Fc).max() < norm0 or t < 1e-6:
                    break
                t *= 0.5
            z, F = cand, Fc
        if np.abs(F).max() < tol:
            return z, it
    raise NumericalFailure(
        f"Newton did not converge for gamma={gamma} from {start}: residual {np.abs(F).max():.3e}")


def grid_argmin(gamma: float, m: int = 2000) -> tuple[float, float]:
    """Brute-force argmin of R over an m x m grid interior to (0, 1)^2."""
    r = (np.arange(m) + 0.5) / m
    A, B = np.meshgrid(r, r, indexing="ij")
    k = np.argmin(log_radial_objective(gamma, A, B))
    i, j = np.unravel_index(k, A.shape)
    return float(r[i]), float(r[j])


def kr_minimize(gamma: float, kappa1: float = 1.0) -> KrCritPoint:
    """Minimum point (rho1, rho2) of H2, reported at theta = pi/2."""
    if gamma <= 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    try:
        z, its = newton_radii(gamma)
    except NumericalFailure:
        z, its = newton_radii(gamma, start=grid_argmin(gamma, 200))
    rho1, rho2 = float(z[0]), float(z[1])
    theta = 0.5 * math.pi
    p = KrProblem.from_gamma(gamma, kappa1)
    value = kr_energy(p, (0.0, rho1), (0.0, -rho2))
    return KrCritPoint(rho1, rho2, theta, value,
                       tuple(float(f) for f in crit_system(gamma, rho1, rho2)), its)
