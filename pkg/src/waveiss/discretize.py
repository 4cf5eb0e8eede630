"""Uniform grid on [0, 1], second-order difference operators, trapezoid rule.

The right end x = 1 carries a Neumann/Robin-type condition u_x(1) = g.  It is
closed with a ghost node u_{N+1} = u_{N-1} + 2*h*g, which gives the boundary
row  (2*u_{N-1} - 2*u_N)/h**2 + 2*g/h.  The left end is Dirichlet (u(0) = 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

MIN_INTERVALS = 8


@dataclass(frozen=True)
class Grid:
    N: int

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < MIN_INTERVALS:
            raise ValueError(f"grid needs an integer N >= {MIN_INTERVALS}, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @cached_property
    def x(self) -> np.ndarray:
        x = np.arange(self.N + 1, dtype=float) / self.N
        x.setflags(write=False)
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.N + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.setflags(write=False)
        return w

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.N * factor)


def _check(grid: Grid, field: np.ndarray) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    if field.shape != (grid.N + 1,):
        raise ValueError(f"field has shape {field.shape}, grid needs ({grid.N + 1},)")
    return field


def trapz(grid: Grid, values: np.ndarray) -> float:
    """Trapezoid rule on the grid nodes."""
    return float(grid.weights @ _check(grid, values))


def l2_norm(grid: Grid, field: np.ndarray) -> float:
    return float(np.sqrt(trapz(grid, np.square(field))))


def first_diff(grid: Grid, field: np.ndarray) -> np.ndarray:
    """Central differences inside, second-order one-sided at both ends."""
    u = _check(grid, field)
    h = grid.h
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    out[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    return out


def second_diff(grid: Grid, field: np.ndarray, slope_at_1: float) -> np.ndarray:
    """Second difference with the ghost-node closure u_x(1) = ``slope_at_1``.

    The x = 0 node is Dirichlet and carries no equation; its value is the
    linear extrapolation of the two neighbouring interior rows.
    """
    u = _check(grid, field)
    h2 = grid.h**2
    out = np.empty_like(u)
    out[1:-1] = (u[:-2] - 2.0 * u[1:-1] + u[2:]) / h2
    out[-1] = 2.0 * (u[-2] - u[-1]) / h2 + 2.0 * slope_at_1 / grid.h
    out[0] = 2.0 * out[1] - out[2]
    return out


def forward_gradient_energy(grid: Grid, field: np.ndarray) -> float:
    """Sum of h*((u_{i+1} - u_i)/h)**2, the discrete Dirichlet form."""
    u = _check(grid, field)
    return float(np.sum(np.diff(u) ** 2) / grid.h)


def first_diff_matrix(grid: Grid) -> sp.csr_matrix:
    n = grid.N + 1
    h = grid.h
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1] = -0.5 / h
        D[i, i + 1] = 0.5 / h
    D[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
    D[n - 1, n - 3 : n] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)
    return D.tocsr()


def second_diff_matrix(grid: Grid) -> sp.csr_matrix:
    """Matrix of :func:`second_diff` without the boundary-slope term.

    Row 0 is left empty (Dirichlet node).  The slope contribution ``2*g/h``
    to row N is the caller's responsibility.
    """
    n = grid.N + 1
    h2 = grid.h**2
    main = np.full(n, -2.0 / h2)
    lower = np.full(n - 1, 1.0 / h2)
    upper = np.full(n - 1, 1.0 / h2)
    lower[-1] = 2.0 / h2
    main[0] = 0.0
    upper[0] = 0.0
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")
