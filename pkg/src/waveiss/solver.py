"""Trapezoidal (Crank-Nicolson) time stepping for the string models.

The PDEs are rewritten first order in time in (u, w = u_t, theta) and
discretised in space with the operators of :mod:`waveiss.discretize`.  The
semi-discrete system is ``Mass y' = A y + F(t)``; each step solves

    (Mass - dt/2 A) y_{n+1} = (Mass + dt/2 A) y_n + dt/2 (F_n + F_{n+1})

with a sparse LU factorisation computed once per stepper.  Unknowns are
interleaved node by node so the matrices stay banded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from waveiss.discretize import Grid, first_diff_matrix, l2_norm, second_diff_matrix
from waveiss.model import (
    NO_DISTURBANCE,
    DisturbanceSpec,
    InitialData,
    ModelVariant,
    PhysicalParams,
    ThermoacousticParams,
    ThermoInitialData,
    eval_disturbance,
    validate,
    validate_thermoacoustic,
)


class SingularSystemError(RuntimeError):
    def __init__(self, message: str, condition_estimate: float):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")
        self.condition_estimate = condition_estimate


class NonFiniteStateError(FloatingPointError):
    """A step produced NaN or Inf; ``last_healthy_index`` is the last good step."""

    def __init__(self, last_healthy_index: int, t: float):
        super().__init__(f"non-finite state after step {last_healthy_index} (t={t:.6g})")
        self.last_healthy_index = last_healthy_index
        self.t = t


class SimulationAborted(RuntimeError):
    """Raised by :func:`run` on a NaN abort; carries the healthy prefix."""

    def __init__(self, trajectory: "Trajectory", last_healthy_index: int):
        super().__init__(f"run aborted: non-finite state after step {last_healthy_index}")
        self.trajectory = trajectory
        self.last_healthy_index = last_healthy_index


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StringState:
    t: float
    u: np.ndarray
    w: np.ndarray
    theta: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "u", _readonly(self.u))
        object.__setattr__(self, "w", _readonly(self.w))
        if self.theta is not None:
            object.__setattr__(self, "theta", _readonly(self.theta))

    @property
    def grid(self) -> Grid:
        return Grid(self.u.size - 1)

    @classmethod
    def from_initial(cls, init: InitialData, variant: ModelVariant | str, t: float = 0.0) -> "StringState":
        theta = None
        if ModelVariant(variant).thermal:
            theta = init.theta0 if init.theta0 is not None else np.zeros_like(init.u0)
        return cls(t, init.u0, init.w0, theta)


@dataclass(frozen=True)
class ThermoState:
    t: float
    rho: np.ndarray
    v: np.ndarray
    theta: np.ndarray

    def __post_init__(self) -> None:
        for name in ("rho", "v", "theta"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def grid(self) -> Grid:
        return Grid(self.v.size - 1)

    @classmethod
    def from_initial(cls, init: ThermoInitialData, t: float = 0.0) -> "ThermoState":
        return cls(t, init.rho0, init.v0, init.theta0)


@dataclass
class Trajectory:
    """States at t_n = n*dt with per-step disturbance magnitudes."""

    variant: ModelVariant
    params: PhysicalParams | ThermoacousticParams
    grid: Grid
    dt: float
    times: np.ndarray
    fields: dict[str, np.ndarray]
    f_norms: np.ndarray
    d_abs: np.ndarray
    remainder: float = 0.0
    truncated: bool = False

    def __len__(self) -> int:
        return self.times.size

    def state(self, n: int) -> StringState | ThermoState:
        t = float(self.times[n])
        if self.variant is ModelVariant.THERMOACOUSTIC:
            return ThermoState(t, self.fields["rho"][n], self.fields["v"][n], self.fields["theta"][n])
        theta = self.fields["theta"][n] if "theta" in self.fields else None
        return StringState(t, self.fields["u"][n], self.fields["w"][n], theta)

    def states(self) -> Iterator[StringState | ThermoState]:
        for n in range(len(self)):
            yield self.state(n)

    @property
    def final(self) -> StringState | ThermoState:
        return self.state(len(self) - 1)


# --------------------------------------------------------------------------
# Assembly
# --------------------------------------------------------------------------


class _Builder:
    def __init__(self, n: int):
        self.n = n
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []

    def add(self, i: int, j: int, v: float) -> None:
        if v != 0.0:
            self.rows.append(i)
            self.cols.append(j)
            self.vals.append(v)

    def add_row(self, i: int, cols: np.ndarray, vals: np.ndarray, scale: float) -> None:
        for j, v in zip(cols, vals):
            self.add(i, int(j), scale * float(v))

    def build(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.n, self.n))


def _row(matrix: sp.csr_matrix, i: int) -> tuple[np.ndarray, np.ndarray]:
    start, stop = matrix.indptr[i], matrix.indptr[i + 1]
    return matrix.indices[start:stop], matrix.data[start:stop]


class _CrankNicolson:
    """Factorised CN update for ``Mass y' = A y + F``."""

    def __init__(self, mass: sp.csr_matrix, A: sp.csr_matrix, pinned: list[int], dt: float):
        if not dt > 0:
            raise ValueError("dt must be > 0")
        self.dt = dt
        lhs = (mass - 0.5 * dt * A).tolil()
        rhs = (mass + 0.5 * dt * A).tolil()
        for i in pinned:
            lhs.rows[i], lhs.data[i] = [i], [1.0]
            rhs.rows[i], rhs.data[i] = [], []
        self.lhs = lhs.tocsc()
        self.rhs = rhs.tocsr()
        self.pinned = np.asarray(pinned, dtype=int)
        try:
            self.lu = spla.splu(self.lhs, permc_spec="NATURAL")
        except RuntimeError as exc:
            raise SingularSystemError(str(exc), _condition_estimate(self.lhs)) from exc
        diag = np.abs(self.lu.U.diagonal())
        if diag.min() <= 1e-14 * diag.max():
            raise SingularSystemError("near-singular trapezoidal system", _condition_estimate(self.lhs))

    def advance(self, y: np.ndarray, F_now: np.ndarray, F_next: np.ndarray) -> np.ndarray:
        b = self.rhs @ y + 0.5 * self.dt * (F_now + F_next)
        b[self.pinned] = 0.0
        return self.lu.solve(b)


def _condition_estimate(matrix: sp.spmatrix) -> float:
    if matrix.shape[0] <= 4000:
        return float(np.linalg.cond(matrix.toarray(), 1))
    return float("inf")


class StringStepper:
    """Assembles and factorises one (variant, params, grid, dt) combination."""

    def __init__(self, variant: ModelVariant | str, params: PhysicalParams, grid: Grid, dt: float):
        variant = ModelVariant(variant)
        if variant is ModelVariant.THERMOACOUSTIC:
            raise ValueError("use ThermoacousticStepper for the thermoacoustic system")
        validate(params, variant).raise_if_invalid()
        self.variant, self.params, self.grid, self.dt = variant, params, grid, dt
        self.nf = 3 if variant.thermal else 2
        N, h = grid.N, grid.h
        c2 = params.c**2
        mu = 0.0 if variant is ModelVariant.A else params.mu
        sigma = params.sigma if variant.kelvin_voigt else 0.0
        n = self.nf * (N + 1)
        U, W, T = self.index("u"), self.index("w"), self.index("theta") if variant.thermal else None
        D1 = first_diff_matrix(grid)
        D2 = second_diff_matrix(grid)

        mass, A = _Builder(n), _Builder(n)
        for i in range(1, N + 1):
            mass.add(U(i), U(i), 1.0)
            A.add(U(i), W(i), 1.0)

            mass.add(W(i), W(i), 1.0 + (2.0 * params.a * sigma / h if i == N else 0.0))
            cols, vals = _row(D2, i)
            A.add_row(W(i), U(cols), vals, c2)
            if sigma:
                A.add_row(W(i), W(cols), vals, sigma)
            A.add(W(i), W(i), -mu)
            if i == N:
                # ghost closure of u_x(1) = -a w_N + d
                A.add(W(i), W(i), -2.0 * params.a * c2 / h)
            if T is not None:
                cols, vals = _row(D1, i)
                A.add_row(W(i), T(cols), vals, -params.b)

        if T is not None:
            for i in range(1, N):
                mass.add(T(i), T(i), 1.0)
                cols, vals = _row(D2, i)
                A.add_row(T(i), T(cols), vals, params.k)
                cols, vals = _row(D1, i)
                A.add_row(T(i), W(cols), vals, -params.lam)

        pinned = [U(0), W(0)] + ([T(0), T(N)] if T is not None else [])
        self._w_rows = W(np.arange(N + 1))
        self._d_row = W(N)
        self._d_scale = 2.0 * c2 / h
        self.mass, self.A = mass.build(), A.build()
        self.cn = _CrankNicolson(self.mass, self.A, pinned, dt)

    def index(self, name: str):
        offset = {"u": 0, "w": 1, "theta": 2}[name]
        nf = self.nf
        return lambda i: nf * np.asarray(i) + offset if np.ndim(i) else nf * int(i) + offset

    def forcing(self, disturbance: DisturbanceSpec, t: float) -> np.ndarray:
        F = np.zeros(self.nf * (self.grid.N + 1))
        if disturbance.is_zero:
            return F
        f, d = eval_disturbance(disturbance, t, self.grid)
        F[self._w_rows] = f
        F[self._d_row] += self._d_scale * d
        return F

    def pack(self, state: StringState) -> np.ndarray:
        y = np.empty(self.nf * (self.grid.N + 1))
        y[0 :: self.nf] = state.u
        y[1 :: self.nf] = state.w
        if self.nf == 3:
            y[2 :: self.nf] = state.theta if state.theta is not None else 0.0
        return y

    def unpack(self, y: np.ndarray, t: float) -> StringState:
        theta = y[2 :: self.nf] if self.nf == 3 else None
        return StringState(t, y[0 :: self.nf], y[1 :: self.nf], theta)


def _check_disturbance(variant: ModelVariant, disturbance: DisturbanceSpec) -> None:
    if variant is ModelVariant.A and not disturbance.is_zero:
        raise ValueError("variant A is the undisturbed closed loop; disturbances must be zero")
    if variant is ModelVariant.D and not disturbance.d.is_zero:
        raise ValueError("variant D has no boundary disturbance d")


@lru_cache(maxsize=8)
def _cached_stepper(variant: ModelVariant, params: PhysicalParams, grid: Grid, dt: float) -> StringStepper:
    return StringStepper(variant, params, grid, dt)


def default_dt(grid: Grid, c: float, courant: float = 1.0) -> float:
    return courant * grid.h / c


def step(
    variant: ModelVariant | str,
    params: PhysicalParams,
    grid: Grid,
    state: StringState,
    disturbance: DisturbanceSpec = NO_DISTURBANCE,
    dt: float | None = None,
) -> StringState:
    """Advance ``state`` by one trapezoidal step."""
    variant = ModelVariant(variant)
    _check_disturbance(variant, disturbance)
    dt = default_dt(grid, params.c) if dt is None else float(dt)
    stepper = _cached_stepper(variant, params, grid, dt)
    y = stepper.pack(state)
    t = state.t
    y_new = stepper.cn.advance(y, stepper.forcing(disturbance, t), stepper.forcing(disturbance, t + dt))
    if not np.all(np.isfinite(y_new)):
        raise NonFiniteStateError(0, t + dt)
    return stepper.unpack(y_new, t + dt)


def _step_count(T: float, dt: float) -> tuple[int, float]:
    if T < 0:
        raise ValueError("T must be >= 0")
    n = int(math.floor(T / dt + 1e-9))
    return n, T - n * dt


def run(
    variant: ModelVariant | str,
    params: PhysicalParams,
    grid: Grid,
    init: InitialData,
    disturbance: DisturbanceSpec = NO_DISTURBANCE,
    dt: float | None = None,
    T: float = 10.0,
) -> Trajectory:
    """Simulate ``floor(T/dt)`` steps; raises :class:`SimulationAborted` on NaN."""
    variant = ModelVariant(variant)
    _check_disturbance(variant, disturbance)
    if init.u0.size != grid.N + 1:
        raise ValueError("initial data does not match the grid")
    dt = default_dt(grid, params.c) if dt is None else float(dt)
    n_steps, remainder = _step_count(T, dt)
    stepper = StringStepper(variant, params, grid, dt)
    nf, n1 = stepper.nf, grid.N + 1

    Y = np.empty((n_steps + 1, nf * n1))
    times = dt * np.arange(n_steps + 1)
    f_norms = np.empty(n_steps + 1)
    d_abs = np.empty(n_steps + 1)
    Y[0] = stepper.pack(StringState.from_initial(init, variant))

    def record(n: int) -> np.ndarray:
        f, d = eval_disturbance(disturbance, times[n], grid)
        f_norms[n], d_abs[n] = l2_norm(grid, f), abs(d)
        return stepper.forcing(disturbance, times[n])

    F_now = record(0)
    last = n_steps
    for n in range(n_steps):
        F_next = record(n + 1)
        Y[n + 1] = stepper.cn.advance(Y[n], F_now, F_next)
        if not np.all(np.isfinite(Y[n + 1])):
            last = n
            break
        F_now = F_next

    names = ["u", "w", "theta"][:nf]
    traj = Trajectory(
        variant=variant,
        params=params,
        grid=grid,
        dt=dt,
        times=times[: last + 1],
        fields={name: Y[: last + 1, j::nf] for j, name in enumerate(names)},
        f_norms=f_norms[: last + 1],
        d_abs=d_abs[: last + 1],
        remainder=remainder,
        truncated=last < n_steps,
    )
    if traj.truncated:
        raise SimulationAborted(traj, last)
    return traj


# --------------------------------------------------------------------------
# Thermoacoustics
# --------------------------------------------------------------------------


class ThermoacousticStepper:
    """(rho, v, theta) system with v(0) = 0, v_x(1) = -a v_t(1), theta Dirichlet.

    The density row at x = 1 uses the boundary relation rho_t(1) = gamma*a*v_t(1)
    obtained from rho_t = -gamma v_x.
    """

    def __init__(self, params: ThermoacousticParams, grid: Grid, dt: float):
        validate_thermoacoustic(params).raise_if_invalid()
        self.params, self.grid, self.dt = params, grid, dt
        N, h = grid.N, grid.h
        p = params
        n = 3 * (N + 1)
        R = lambda i: 3 * np.asarray(i)  # noqa: E731
        V = lambda i: 3 * np.asarray(i) + 1  # noqa: E731
        T = lambda i: 3 * np.asarray(i) + 2  # noqa: E731
        D1 = first_diff_matrix(grid)
        D2 = second_diff_matrix(grid)

        mass, A = _Builder(n), _Builder(n)
        for i in range(N + 1):
            mass.add(int(R(i)), int(R(i)), 1.0)
            if i < N:
                cols, vals = _row(D1, i)
                A.add_row(int(R(i)), V(cols), vals, -p.gamma_fluid)
            else:
                mass.add(int(R(i)), int(V(i)), -p.gamma_fluid * p.a)
        for i in range(1, N + 1):
            mass.add(int(V(i)), int(V(i)), 1.0 + (2.0 * p.a * p.sigma / h if i == N else 0.0))
            cols, vals = _row(D1, i)
            A.add_row(int(V(i)), R(cols), vals, -(p.c**2) / p.gamma_fluid)
            A.add_row(int(V(i)), T(cols), vals, -p.b)
            cols, vals = _row(D2, i)
            A.add_row(int(V(i)), V(cols), vals, p.sigma)
        for i in range(1, N):
            mass.add(int(T(i)), int(T(i)), 1.0)
            cols, vals = _row(D2, i)
            A.add_row(int(T(i)), T(cols), vals, p.k)
            cols, vals = _row(D1, i)
            A.add_row(int(T(i)), V(cols), vals, -p.lam)

        pinned = [int(V(0)), int(T(0)), int(T(N))]
        self._v_rows = V(np.arange(N + 1))
        self.mass, self.A = mass.build(), A.build()
        self.cn = _CrankNicolson(self.mass, self.A, pinned, dt)

    def forcing(self, disturbance: DisturbanceSpec, t: float) -> np.ndarray:
        F = np.zeros(3 * (self.grid.N + 1))
        if not disturbance.f.is_zero:
            F[self._v_rows] = disturbance.f.sample(t, self.grid)
        return F

    @staticmethod
    def pack(state: ThermoState) -> np.ndarray:
        y = np.empty(3 * state.v.size)
        y[0::3], y[1::3], y[2::3] = state.rho, state.v, state.theta
        return y

    @staticmethod
    def unpack(y: np.ndarray, t: float) -> ThermoState:
        return ThermoState(t, y[0::3], y[1::3], y[2::3])


@lru_cache(maxsize=8)
def _cached_ta_stepper(params: ThermoacousticParams, grid: Grid, dt: float) -> ThermoacousticStepper:
    return ThermoacousticStepper(params, grid, dt)


def step_thermoacoustic(
    params: ThermoacousticParams,
    grid: Grid,
    state: ThermoState,
    dt: float | None = None,
    disturbance: DisturbanceSpec = NO_DISTURBANCE,
) -> ThermoState:
    """One trapezoidal step; ``disturbance.f`` acts as a body force on v."""
    if not disturbance.d.is_zero:
        raise ValueError("the thermoacoustic system has no boundary disturbance")
    dt = default_dt(grid, params.c) if dt is None else float(dt)
    stepper = _cached_ta_stepper(params, grid, dt)
    t = state.t
    y = stepper.cn.advance(
        stepper.pack(state), stepper.forcing(disturbance, t), stepper.forcing(disturbance, t + dt)
    )
    if not np.all(np.isfinite(y)):
        raise NonFiniteStateError(0, t + dt)
    return stepper.unpack(y, t + dt)


def run_thermoacoustic(
    params: ThermoacousticParams,
    grid: Grid,
    init: ThermoInitialData,
    dt: float | None = None,
    T: float = 1.0,
    disturbance: DisturbanceSpec = NO_DISTURBANCE,
) -> Trajectory:
    if not disturbance.d.is_zero:
        raise ValueError("the thermoacoustic system has no boundary disturbance")
    dt = default_dt(grid, params.c) if dt is None else float(dt)
    n_steps, remainder = _step_count(T, dt)
    stepper = ThermoacousticStepper(params, grid, dt)
    Y = np.empty((n_steps + 1, 3 * (grid.N + 1)))
    times = dt * np.arange(n_steps + 1)
    f_norms = np.array([l2_norm(grid, disturbance.f.sample(t, grid)) for t in times])
    Y[0] = stepper.pack(ThermoState.from_initial(init))
    last = n_steps
    F_now = stepper.forcing(disturbance, 0.0)
    for n in range(n_steps):
        F_next = stepper.forcing(disturbance, times[n + 1])
        Y[n + 1] = stepper.cn.advance(Y[n], F_now, F_next)
        if not np.all(np.isfinite(Y[n + 1])):
            last = n
            break
        F_now = F_next
    traj = Trajectory(
        variant=ModelVariant.THERMOACOUSTIC,
        params=params,
        grid=grid,
        dt=dt,
        times=times[: last + 1],
        fields={name: Y[: last + 1, j::3] for j, name in enumerate(("rho", "v", "theta"))},
        f_norms=f_norms[: last + 1],
        d_abs=np.zeros(last + 1),
        remainder=remainder,
        truncated=last < n_steps,
    )
    if traj.truncated:
        raise SimulationAborted(traj, last)
    return traj
