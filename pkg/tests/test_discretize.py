import numpy as np
import pytest

from waveiss.discretize import (
    Grid,
    first_diff,
    first_diff_matrix,
    forward_gradient_energy,
    l2_norm,
    second_diff,
    second_diff_matrix,
    trapz,
)

# Error constant for the sine test below.  The leading truncation term is
# (pi^4/12) h^2 ~ 8.12 h^2; measured 8.12 at N=64 and frozen with a small margin.
SECOND_DIFF_CONSTANT = 8.5


def test_grid_rejects_tiny_grids():
    with pytest.raises(ValueError):
        Grid(4)


def test_grid_nodes_and_spacing():
    grid = Grid(8)
    assert grid.h == 0.125 and grid.x[0] == 0.0 and grid.x[-1] == 1.0 and grid.x.size == 9


def test_second_diff_of_linear_vanishes():
    grid = Grid(8)
    out = second_diff(grid, grid.x, slope_at_1=1.0)
    assert np.allclose(out[1:], 0.0, atol=1e-12)


def test_second_diff_exact_on_quadratics():
    grid = Grid(8)
    out = second_diff(grid, grid.x**2, slope_at_1=2.0)
    assert np.allclose(out[1:-1], 2.0, rtol=0, atol=1e-12)


def test_second_diff_sine_error_is_order_h_squared():
    errors = []
    for N in (64, 128):
        grid = Grid(N)
        x = grid.x
        out = second_diff(grid, np.sin(np.pi * x), slope_at_1=-np.pi)
        err = np.max(np.abs(out[1:-1] + np.pi**2 * np.sin(np.pi * x[1:-1])))
        assert err <= SECOND_DIFF_CONSTANT * grid.h**2
        errors.append(err)
    assert np.log2(errors[0] / errors[1]) == pytest.approx(2.0, abs=0.05)


def test_second_diff_boundary_row_uses_slope():
    errors = []
    for N in (32, 64, 128):
        grid = Grid(N)
        x = grid.x
        out = second_diff(grid, np.cos(x), slope_at_1=-np.sin(1.0))
        errors.append(abs(out[-1] + np.cos(1.0)))
    assert errors[0] / errors[1] > 1.9 and errors[1] / errors[2] > 1.9


def test_first_diff_constant_and_linear():
    grid = Grid(8)
    assert np.all(first_diff(grid, np.full(9, 3.0)) == 0.0)
    assert np.allclose(first_diff(grid, grid.x), 1.0, rtol=0, atol=1e-13)


def test_first_diff_order_two():
    errors = []
    for N in (32, 64, 128):
        grid = Grid(N)
        err = np.max(np.abs(first_diff(grid, np.sin(np.pi * grid.x)) - np.pi * np.cos(np.pi * grid.x)))
        errors.append(err)
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.1)


def test_matrices_agree_with_functions(rng):
    grid = Grid(16)
    u = rng.standard_normal(17)
    assert np.allclose(first_diff_matrix(grid) @ u, first_diff(grid, u))
    D2 = second_diff_matrix(grid) @ u
    ref = second_diff(grid, u, slope_at_1=0.0)
    assert np.allclose(D2[1:], ref[1:])


def test_trapezoid_quadrature():
    grid = Grid(64)
    assert trapz(grid, np.ones(65)) == pytest.approx(1.0)
    assert trapz(grid, np.sin(np.pi * grid.x) ** 2) == pytest.approx(0.5, abs=1e-12)
    assert l2_norm(grid, grid.x) == pytest.approx(np.sqrt(1 / 3), abs=1e-4)


def test_forward_gradient_energy():
    grid = Grid(32)
    assert forward_gradient_energy(grid, grid.x) == pytest.approx(1.0)
