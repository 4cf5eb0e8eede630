"""Physical parameters, model variants, initial data and disturbance signals.

Everything here is immutable and declarative so that a run can be echoed to
JSON and reproduced exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from waveiss.discretize import Grid, first_diff


class ModelVariant(str, Enum):
    """The closed-loop string models plus the thermoacoustic system."""

    A = "A"
    B = "B"
    C = "C"
    D = "D"
    THERMOACOUSTIC = "Thermoacoustic"

    @property
    def thermal(self) -> bool:
        return self in (ModelVariant.C, ModelVariant.D)

    @property
    def kelvin_voigt(self) -> bool:
        return self is ModelVariant.D

    @property
    def theorem(self) -> int | None:
        return {ModelVariant.B: 1, ModelVariant.C: 2, ModelVariant.D: 3}.get(self)


@dataclass(frozen=True)
class PhysicalParams:
    a: float = 1.0
    c: float = 1.0
    mu: float = 0.0
    b: float = 0.0
    k: float = 0.0
    lam: float = 0.0
    sigma: float = 0.0

    def replace(self, **changes: float) -> "PhysicalParams":
        values = self.as_dict()
        values.update(changes)
        return PhysicalParams(**values)

    def as_dict(self) -> dict[str, float]:
        return {
            "a": self.a,
            "c": self.c,
            "mu": self.mu,
            "b": self.b,
            "k": self.k,
            "lam": self.lam,
            "sigma": self.sigma,
        }


@dataclass(frozen=True)
class ThermoacousticParams:
    """Fluid constants of the linear viscous thermoacoustic system.

    ``a`` is the damper gain of the velocity boundary condition at x = 1,
    mirroring the string model D.
    """

    c: float = 1.0
    gamma_fluid: float = 1.0
    b: float = 1.0
    k: float = 1.0
    lam: float = 1.0
    sigma: float = 1.0
    a: float = 1.0

    def string_twin(self) -> PhysicalParams:
        """Model-D parameters obtained by setting v = u_t (no air friction)."""
        return PhysicalParams(
            a=self.a, c=self.c, mu=0.0, b=self.b, k=self.k, lam=self.lam, sigma=self.sigma
        )

    def as_dict(self) -> dict[str, float]:
        return {
            "c": self.c,
            "gamma_fluid": self.gamma_fluid,
            "b": self.b,
            "k": self.k,
            "lam": self.lam,
            "sigma": self.sigma,
            "a": self.a,
        }


@dataclass(frozen=True)
class ValidationReport:
    variant: ModelVariant
    violations: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self) -> None:
        if self.violations:
            raise ValueError(
                f"invalid parameters for variant {self.variant.value}: "
                + "; ".join(self.violations)
            )


def _finite(value: float) -> bool:
    return isinstance(value, (int, float)) and math.isfinite(value)


def validate(params: PhysicalParams, variant: ModelVariant | str) -> ValidationReport:
    """Check the sign constraints the stability theorems require for ``variant``."""
    variant = ModelVariant(variant)
    if variant is ModelVariant.THERMOACOUSTIC:
        raise TypeError("use validate_thermoacoustic for ThermoacousticParams")
    violations: list[str] = []
    warnings: list[str] = []
    for name, value in params.as_dict().items():
        if not _finite(value):
            violations.append(f"{name} must be a finite number")
    if violations:
        return ValidationReport(variant, tuple(violations))

    if not params.a > 0:
        violations.append("a must be > 0")
    if not params.c > 0:
        violations.append("c must be > 0")
    if not params.mu >= 0:
        violations.append("mu must be >= 0")
    if variant.thermal:
        for name in ("b", "k", "lam"):
            if not getattr(params, name) > 0:
                violations.append(f"{name} must be > 0")
    if variant is ModelVariant.D and not params.sigma > 0:
        violations.append("sigma must be > 0")

    if variant is ModelVariant.A and params.mu != 0:
        warnings.append("mu is ignored by variant A (undamped wave equation)")
    if not variant.thermal and (params.b or params.k or params.lam):
        warnings.append(f"thermal constants are ignored by variant {variant.value}")
    if variant is not ModelVariant.D and params.sigma:
        warnings.append(f"sigma is ignored by variant {variant.value}")
    return ValidationReport(variant, tuple(violations), tuple(warnings))


def validate_thermoacoustic(params: ThermoacousticParams) -> ValidationReport:
    violations = [
        f"{name} must be > 0"
        for name, value in params.as_dict().items()
        if not (_finite(value) and value > 0)
    ]
    return ValidationReport(ModelVariant.THERMOACOUSTIC, tuple(violations))


# --------------------------------------------------------------------------
# Disturbance signals
# --------------------------------------------------------------------------

TIME_SIGNAL_KINDS = ("zero", "constant", "sinusoid", "pulse", "exponential", "tabulated")


@dataclass(frozen=True)
class TimeSignal:
    """Scalar signal g(t).

    ``sinusoid`` is ``amplitude * sin(2*pi*frequency*t + phase)``; ``pulse`` is
    ``amplitude`` on the support window and zero elsewhere; ``exponential`` is
    ``amplitude * exp(-rate*t)``.  For every kind the value is zero outside
    ``window`` when a window is given.  ``tabulated`` interpolates linearly in
    ``times``/``values`` and refuses to extrapolate.
    """

    kind: str = "zero"
    amplitude: float = 1.0
    frequency: float = 0.0
    phase: float = 0.0
    rate: float = 0.0
    window: tuple[float, float] | None = None
    times: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in TIME_SIGNAL_KINDS:
            raise ValueError(f"unknown time-signal kind {self.kind!r}")
        if self.kind == "pulse" and self.window is None:
            raise ValueError("a pulse needs a support window")
        if self.kind == "tabulated":
            if len(self.times) < 2 or len(self.times) != len(self.values):
                raise ValueError("tabulated signal needs matching times/values (>= 2 points)")
            if np.any(np.diff(self.times) <= 0):
                raise ValueError("tabulated times must be strictly increasing")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind != "tabulated" and self.amplitude == 0.0)

    def __call__(self, t: float) -> float:
        if self.kind == "tabulated":
            if t < self.times[0] or t > self.times[-1]:
                raise ValueError(
                    f"tabulated signal queried at t={t} outside [{self.times[0]}, {self.times[-1]}]"
                )
            return float(np.interp(t, self.times, self.values))
        if self.window is not None and not (self.window[0] <= t < self.window[1]):
            return 0.0
        if self.kind == "zero":
            return 0.0
        if self.kind in ("constant", "pulse"):
            return float(self.amplitude)
        if self.kind == "sinusoid":
            return float(self.amplitude * math.sin(2.0 * math.pi * self.frequency * t + self.phase))
        return float(self.amplitude * math.exp(-self.rate * t))


ZERO_SIGNAL = TimeSignal()

PROFILE_PRESETS = {
    "uniform": lambda x: np.ones_like(x),
    "sine": lambda x: np.sin(np.pi * x),
    "half_sine": lambda x: np.sin(0.5 * np.pi * x),
    "linear": lambda x: x.copy(),
}


@dataclass(frozen=True)
class SpaceTimeSignal:
    """Distributed input f(t, x).

    ``separable`` means ``g(t) * profile(x)`` where ``profile`` is either a
    nodal sample sequence or one of :data:`PROFILE_PRESETS`.  ``tabulated``
    holds one nodal row per entry of ``times``.
    """

    kind: str = "zero"
    g: TimeSignal = ZERO_SIGNAL
    profile: tuple[float, ...] | str = "uniform"
    times: tuple[float, ...] = ()
    rows: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "separable", "tabulated"):
            raise ValueError(f"unknown space-time signal kind {self.kind!r}")
        if isinstance(self.profile, str) and self.profile not in PROFILE_PRESETS:
            raise ValueError(f"unknown profile preset {self.profile!r}")
        if self.kind == "tabulated":
            if len(self.times) < 2 or len(self.times) != len(self.rows):
                raise ValueError("tabulated f needs one row per time (>= 2 times)")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind == "separable" and self.g.is_zero)

    def profile_on(self, grid: Grid) -> np.ndarray:
        if isinstance(self.profile, str):
            return PROFILE_PRESETS[self.profile](grid.x)
        samples = np.asarray(self.profile, dtype=float)
        if samples.shape != (grid.N + 1,):
            raise ValueError(f"profile has {samples.size} samples, grid needs {grid.N + 1}")
        return samples

    def sample(self, t: float, grid: Grid) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(grid.N + 1)
        if self.kind == "separable":
            return self.g(t) * self.profile_on(grid)
        times = self.times
        if t < times[0] or t > times[-1]:
            raise ValueError(f"tabulated f queried at t={t} outside [{times[0]}, {times[-1]}]")
        rows = np.asarray(self.rows, dtype=float)
        if rows.shape[1] != grid.N + 1:
            raise ValueError(f"tabulated f rows have {rows.shape[1]} nodes, grid needs {grid.N + 1}")
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = min(max(j, 0), len(times) - 2)
        s = (t - times[j]) / (times[j + 1] - times[j])
        return (1.0 - s) * rows[j] + s * rows[j + 1]


@dataclass(frozen=True)
class DisturbanceSpec:
    f: SpaceTimeSignal = field(default_factory=SpaceTimeSignal)
    d: TimeSignal = ZERO_SIGNAL

    @property
    def is_zero(self) -> bool:
        return self.f.is_zero and self.d.is_zero


NO_DISTURBANCE = DisturbanceSpec()


def eval_disturbance(spec: DisturbanceSpec, t: float, grid: Grid) -> tuple[np.ndarray, float]:
    """Sample f[t] on the grid nodes and d(t)."""
    return spec.f.sample(t, grid), spec.d(t)


def sinusoidal_disturbance(
    amplitude: float = 1.0, frequency: float = 3.0, profile: str = "uniform", boundary: bool = True
) -> DisturbanceSpec:
    g = TimeSignal("sinusoid", amplitude=amplitude, frequency=frequency)
    return DisturbanceSpec(
        f=SpaceTimeSignal("separable", g=g, profile=profile),
        d=g if boundary else ZERO_SIGNAL,
    )


# --------------------------------------------------------------------------
# Initial data
# --------------------------------------------------------------------------

PROFILE_KINDS = ("zero", "sine", "gaussian", "bump", "polynomial", "tabulated")


@dataclass(frozen=True)
class ProfileSpec:
    """Declarative nodal profile used to build initial data on any grid.

    ``sine``: amplitude*sin(wavenumber*pi*x); ``gaussian``:
    amplitude*exp(-((x-center)/width)**2); ``bump``: the C-infinity bump of
    half-width ``width`` centred at ``center``; ``polynomial``: sum of
    coefficients[k]*x**k; ``tabulated``: explicit nodal values.
    """

    kind: str = "zero"
    amplitude: float = 1.0
    wavenumber: float = 0.5
    center: float = 0.5
    width: float = 0.25
    coefficients: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    def sample(self, grid: Grid) -> np.ndarray:
        x = grid.x
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "sine":
            return self.amplitude * np.sin(self.wavenumber * np.pi * x)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-(((x - self.center) / self.width) ** 2))
        if self.kind == "bump":
            s = (x - self.center) / self.width
            out = np.zeros_like(x)
            inside = np.abs(s) < 1.0
            out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
            return out
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(x, np.asarray(self.coefficients, float))
        values = np.asarray(self.values, dtype=float)
        if values.shape != x.shape:
            raise ValueError(f"tabulated profile has {values.size} values, grid needs {x.size}")
        return values


_PIN_TOL = 1e-12


def _pin(values: np.ndarray, indices: Sequence[int], name: str, errors: list[str]) -> np.ndarray:
    values = np.array(values, dtype=float)
    scale = max(1.0, float(np.max(np.abs(values))) if values.size else 1.0)
    for i in indices:
        if abs(values[i]) > _PIN_TOL * scale:
            errors.append(f"{name}[{i}] = {values[i]:.3e} must vanish at the boundary")
        values[i] = 0.0
    return values


@dataclass(frozen=True)
class InitialData:
    """Nodal initial data; arrays are read-only after construction."""

    u0: np.ndarray
    w0: np.ndarray
    theta0: np.ndarray | None = None

    def __post_init__(self) -> None:
        errors: list[str] = []
        u0 = _pin(self.u0, [0], "u0", errors)
        w0 = _pin(self.w0, [0], "w0", errors)
        if u0.shape != w0.shape:
            errors.append("u0 and w0 must have the same length")
        theta0 = None
        if self.theta0 is not None:
            theta0 = _pin(self.theta0, [0, -1], "theta0", errors)
            if theta0.shape != u0.shape:
                errors.append("theta0 must have the same length as u0")
        if errors:
            raise ValueError("; ".join(errors))
        for arr in (u0, w0, theta0):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "theta0", theta0)

    @property
    def grid(self) -> Grid:
        return Grid(self.u0.size - 1)

    @classmethod
    def from_profiles(
        cls,
        grid: Grid,
        u0: ProfileSpec,
        w0: ProfileSpec = ProfileSpec(),
        theta0: ProfileSpec | None = None,
    ) -> "InitialData":
        return cls(
            u0.sample(grid),
            w0.sample(grid),
            None if theta0 is None else theta0.sample(grid),
        )


@dataclass(frozen=True)
class ThermoInitialData:
    rho0: np.ndarray
    v0: np.ndarray
    theta0: np.ndarray

    def __post_init__(self) -> None:
        errors: list[str] = []
        rho0 = np.array(self.rho0, dtype=float)
        v0 = _pin(self.v0, [0], "v0", errors)
        theta0 = _pin(self.theta0, [0, -1], "theta0", errors)
        if not (rho0.shape == v0.shape == theta0.shape):
            errors.append("rho0, v0, theta0 must have the same length")
        if errors:
            raise ValueError("; ".join(errors))
        for arr in (rho0, v0, theta0):
            arr.setflags(write=False)
        object.__setattr__(self, "rho0", rho0)
        object.__setattr__(self, "v0", v0)
        object.__setattr__(self, "theta0", theta0)


def compatibility_warnings(
    init: InitialData, params: PhysicalParams, variant: ModelVariant | str, d0: float = 0.0, tol: float | None = None
) -> list[str]:
    """Report (not enforce) first-order compatibility of the data at x = 1.

    The check is u0'(1) = -a*w0(1) + d(0), with u0'(1) from the second-order
    one-sided difference; the default tolerance scales with h**2.
    """
    variant = ModelVariant(variant)
    grid = init.grid
    if tol is None:
        tol = 10.0 * grid.h**2
    slope = first_diff(grid, init.u0)[-1]
    target = -params.a * init.w0[-1] + (0.0 if variant is ModelVariant.D else d0)
    scale = 1.0 + float(np.max(np.abs(first_diff(grid, init.u0)))) + abs(init.w0[-1])
    out: list[str] = []
    if abs(slope - target) > tol * scale:
        out.append(
            f"u0'(1) = {slope:.6g} differs from -a*w0(1) + d(0) = {target:.6g}; "
            "expect reduced convergence order"
        )
    if variant.thermal and init.theta0 is None:
        out.append(f"variant {variant.value} needs theta0; zeros will be used")
    return out
