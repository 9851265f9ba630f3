"""Dirichlet Green's function of the unit disk and kernel quadrature.

All closed forms use the identity

    |y|^2 |x - y/|y|^2|^2 = |x - y|^2 + (1 - |x|^2)(1 - |y|^2),

which removes the apparent singularity at ``y = 0`` and keeps ``G`` manifestly
positive.  Point-value functions accept a single point or an ``(m, 2)`` array.
"""
from __future__ import annotations

import math

import numpy as np

from .disk_grid import DiskGrid, _check_field
from .errors import DomainError, SingularityError

INV_2PI = 1.0 / (2.0 * math.pi)
INV_4PI = 1.0 / (4.0 * math.pi)

# keeps each dense target x source block near 32 MB
_BLOCK = 4_000_000


def _points(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape[-1] != 2:
        raise ValueError(f"expected points with 2 coordinates, got shape {a.shape}")
    if np.any(np.einsum("...i,...i->...", a, a) >= 1.0):
        raise DomainError("point not in the open unit disk")
    return a


def _image_term(x: np.ndarray, y: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """|y|^2 |x - y*|^2 evaluated without forming the image point."""
    ax = 1.0 - np.einsum("...i,...i->...", x, x)
    ay = 1.0 - np.einsum("...i,...i->...", y, y)
    return d2 + ax * ay


def green(x, y):
    """G(x, y) = (1/2pi) ln(1/|x-y|) - h(x, y)."""
    x, y = _points(x), _points(y)
    diff = x - y
    d2 = np.einsum("...i,...i->...", diff, diff)
    if np.any(d2 == 0.0):
        raise SingularityError("green() evaluated at coincident points")
    ax = 1.0 - np.einsum("...i,...i->...", x, x)
    ay = 1.0 - np.einsum("...i,...i->...", y, y)
    out = INV_4PI * np.log1p(ax * ay / d2)
    return float(out) if np.ndim(out) == 0 else out


def h_regular(x, y):
    """Regular part h(x, y) = -(1/2pi) ln(|y| |x - y/|y|^2|); h(x, 0) = 0."""
    x, y = _points(x), _points(y)
    diff = x - y
    d2 = np.einsum("...i,...i->...", diff, diff)
    out = -INV_4PI * np.log(_image_term(x, y, d2))
    return float(out) if np.ndim(out) == 0 else out


def robin(x):
    """h(x, x) = -(1/2pi) ln(1 - |x|^2)."""
    x = _points(x)
    out = -INV_2PI * np.log1p(-np.einsum("...i,...i->...", x, x))
    return float(out) if np.ndim(out) == 0 else out


def _rect_log_primitive(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """F with d2F/dudv = ln(u^2 + v^2), continuous through the axes."""
    r2 = u * u + v * v
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(r2 > 0, np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        au = np.where(u != 0, u * u * np.arctan(v / np.where(u != 0, u, 1.0)), 0.0)
        av = np.where(v != 0, v * v * np.arctan(u / np.where(v != 0, v, 1.0)), 0.0)
    return u * v * lg - 3.0 * u * v + au + av


def log_cell_average(offset: np.ndarray, h: float) -> np.ndarray:
    """Mean of (1/2pi) ln(1/|t - y|) over y in a square cell of side ``h``.

    ``offset`` is ``t - cell_center`` (shape ``(..., 2)``).
    """
    offset = np.asarray(offset, dtype=float)
    a = 0.5 * h
    u0, u1 = -a - offset[..., 0], a - offset[..., 0]
    v0, v1 = -a - offset[..., 1], a - offset[..., 1]
    F = _rect_log_primitive
    integral = F(u1, v1) - F(u0, v1) - F(u1, v0) + F(u0, v0)
    # integral is of ln r^2; mean of -(1/2pi) ln r = -(1/4pi) mean ln r^2
    return -INV_4PI * integral / (h * h)


def _sources(grid: DiskGrid, omega) -> tuple[np.ndarray, np.ndarray]:
    w = _check_field(grid, omega)
    active = np.flatnonzero(w)
    return active, w[active] * grid.areas[active]


def _blocks(m: int, k: int):
    step = max(1, _BLOCK // max(k, 1))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def apply_green(grid: DiskGrid, omega, targets, cutoff: float | None = None) -> np.ndarray:
    """Stream function psi = G omega at ``targets``.

    Off-diagonal contributions use the midpoint rule.  A source cell closer
    than ``cutoff`` (default ``h/2``) to the target has its logarithmic part
    replaced by the exact cell average; its regular part stays at midpoint.
    """
    t = _points(targets)
    t2 = np.atleast_2d(t)
    cutoff = 0.5 * grid.h if cutoff is None else cutoff
    active, mass = _sources(grid, omega)
    out = np.zeros(len(t2))
    if len(active) == 0:
        return out.reshape(t.shape[:-1])
    s = grid.centers[active]
    s_sq = 1.0 - np.einsum("ij,ij->i", s, s)
    for blk in _blocks(len(t2), len(active)):
        tb = t2[blk]
        diff = tb[:, None, :] - s[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        t_sq = 1.0 - np.einsum("ij,ij->i", tb, tb)
        image = d2 + t_sq[:, None] * s_sq[None, :]
        near = d2 < cutoff * cutoff
        safe = np.where(near, 1.0, d2)
        kern = INV_4PI * (np.log(image) - np.log(safe))
        if np.any(near):
            ti, sj = np.nonzero(near)
            kern[ti, sj] = log_cell_average(diff[ti, sj], grid.h) + INV_4PI * np.log(image[ti, sj])
        out[blk] = kern @ mass
    return out.reshape(t.shape[:-1])


def velocity_at(grid: DiskGrid, omega, targets, cutoff: float | None = None) -> np.ndarray:
    """Velocity v = (d2 psi, -d1 psi) at ``targets``.

    The self-cell contributes only through the regular part; the symmetric
    cell limit of the free-space gradient is zero.
    """
    t = _points(targets)
    t2 = np.atleast_2d(t)
    cutoff = 0.5 * grid.h if cutoff is None else cutoff
    active, mass = _sources(grid, omega)
    grad = np.zeros((len(t2), 2))
    if len(active) > 0:
        s = grid.centers[active]
        s_norm2 = np.einsum("ij,ij->i", s, s)
        s_sq = 1.0 - s_norm2
        for blk in _blocks(len(t2), len(active)):
            tb = t2[blk]
            diff = tb[:, None, :] - s[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            t_sq = 1.0 - np.einsum("ij,ij->i", tb, tb)
            image = d2 + t_sq[:, None] * s_sq[None, :]
            near = d2 < cutoff * cutoff
            free = np.where(near, 0.0, -INV_2PI / np.where(near, 1.0, d2))
            # grad_t h = -(1/2pi) (|s|^2 t - s) / image
            reg = INV_2PI / image
            gx = free * diff[..., 0] + reg * (s_norm2[None, :] * tb[:, None, 0] - s[None, :, 0])
            gy = free * diff[..., 1] + reg * (s_norm2[None, :] * tb[:, None, 1] - s[None, :, 1])
            grad[blk, 0] = gx @ mass
            grad[blk, 1] = gy @ mass
    v = np.stack([grad[:, 1], -grad[:, 0]], axis=1)
    return v.reshape(t.shape)
