import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from vpl import Ball, build_grid, integrate, symmetrize_even_odd
from vpl.errors import ConfigurationError, ContractViolation, DomainError


def lattice_count_area(n):
    # independent oracle: count half-offset lattice centres inside the disk
    h = 2.0 / n
    count = 0
    for i in range(n):
        x = -1.0 + h * (i + 0.5)
        for j in range(n):
            y = -1.0 + h * (j + 0.5)
            if x * x + y * y < 1.0:
                count += 1
    return count * h * h


def test_centres_inside_disk():
    g = build_grid(8)
    assert np.all(np.hypot(*g.centers.T) < 1.0)


def test_reflections_are_involutions():
    g = build_grid(8)
    idx = np.arange(g.size)
    assert np.array_equal(g.reflect_x1[g.reflect_x1], idx)
    assert np.array_equal(g.reflect_x2[g.reflect_x2], idx)


@pytest.mark.parametrize("n", [8, 32, 64])
def test_reflections_map_centres_exactly(n):
    g = build_grid(n)
    c = g.centers
    assert np.array_equal(c[g.reflect_x1], c * [-1.0, 1.0])
    assert np.array_equal(c[g.reflect_x2], c * [1.0, -1.0])


def test_no_centre_on_axes():
    g = build_grid(64)
    assert np.all(g.centers != 0.0)


def test_quadrant_orbits_partition_cells():
    g = build_grid(32)
    q = g.quadrant_index
    parts = np.concatenate([q, g.reflect_x1[q], g.reflect_x2[q], g.reflect_x2[g.reflect_x1[q]]])
    assert np.array_equal(np.sort(parts), np.arange(g.size))


def test_area_n64_against_lattice_count():
    g = build_grid(64)
    oracle = lattice_count_area(64)
    assert g.total_area() == pytest.approx(oracle, rel=1e-14)
    assert abs(g.total_area() - math.pi) < 0.05


def test_area_error_decreases_with_refinement():
    errs = [abs(build_grid(n).total_area() - math.pi) for n in (32, 64, 128, 256)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("n", [0, 6, 7])
def test_small_grid_rejected(n):
    with pytest.raises(ConfigurationError):
        build_grid(n)


def test_odd_grid_rejected():
    with pytest.raises(ConfigurationError):
        build_grid(65)


def test_integrate_zero_and_one(grid64):
    assert integrate(grid64, np.zeros(grid64.size)) == 0.0
    assert abs(integrate(grid64, np.ones(grid64.size)) - math.pi) < 0.05


def test_integrate_half_plane_is_exactly_half(grid64):
    upper = (grid64.centers[:, 1] > 0).astype(float)
    assert integrate(grid64, upper) == grid64.total_area() / 2


def test_integrate_length_mismatch(grid64):
    with pytest.raises(ContractViolation):
        integrate(grid64, np.ones(grid64.size - 1))


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_integrate_is_linear(a, b, seed):
    g = build_grid(16)
    rng = np.random.default_rng(seed)
    f, h = rng.normal(size=(2, g.size))
    lhs = integrate(g, a * f + b * h)
    rhs = a * integrate(g, f) + b * integrate(g, h)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(a) + abs(b)) * g.size)


def test_symmetrize_constant_is_zero(grid64):
    assert np.all(symmetrize_even_odd(grid64, np.ones(grid64.size)) == 0.0)


def test_symmetrize_keeps_even_odd_field(grid64):
    x1, x2 = grid64.centers.T
    f = np.cos(3 * x1) * np.sin(2 * x2)
    f = symmetrize_even_odd(grid64, f)
    assert np.array_equal(symmetrize_even_odd(grid64, f), f)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, build_grid(16).size, elements=st.floats(-1e6, 1e6)))
def test_symmetrize_properties(f):
    g = build_grid(16)
    s = symmetrize_even_odd(g, f)
    assert np.array_equal(s[g.reflect_x2], -s)
    assert np.array_equal(s[g.reflect_x1], s)
    assert np.array_equal(symmetrize_even_odd(g, s), s)


def test_ball_validation():
    with pytest.raises(DomainError):
        Ball((0.0, 0.8), 0.25)
    with pytest.raises(ConfigurationError):
        Ball((0.0, 0.0), 0.0)


def test_ball_boundary_cells(grid64):
    b = Ball((0.0, 0.5), 0.2)
    members = grid64.inside_ball(b)
    bnd = grid64.ball_boundary_cells(b)
    assert set(bnd) <= set(members)
    # the centre cells are interior
    centre = np.argmin(np.hypot(*(grid64.centers - [0.0, 0.5]).T))
    assert centre not in set(bnd)


def test_index_of_round_trip(grid64):
    idx = np.array([0, 10, grid64.size - 1])
    assert np.array_equal(grid64.index_of(grid64.centers[idx]), idx)
    with pytest.raises(ContractViolation):
        grid64.index_of([[0.001, 0.002]])
