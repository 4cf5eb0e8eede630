"""Manufactured solutions with exponentially decaying time factor.

The displacement (or fluid velocity) is e^{-t} phi(x) with
phi(x) = sin(pi x / 2) + alpha x^2.  For the undisturbed boundary condition
u_x(1) = -a u_t(1) the coefficient alpha = a/(2 - a) makes phi'(1) = a phi(1);
otherwise alpha = 0 and the boundary input d absorbs the mismatch.  The
temperature e^{-t} psi(x) solves the heat equation exactly, since the models
carry no heat source: k psi'' + psi = s phi' with psi(0) = psi(1) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from waveiss.discretize import Grid
from waveiss.model import (
    DisturbanceSpec,
    InitialData,
    ModelVariant,
    PhysicalParams,
    SpaceTimeSignal,
    ThermoacousticParams,
    ThermoInitialData,
    TimeSignal,
)
from waveiss.solver import StringState, ThermoState

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class Profile:
    alpha: float

    def phi(self, x):
        return np.sin(HALF_PI * x) + self.alpha * x**2

    def dphi(self, x):
        return HALF_PI * np.cos(HALF_PI * x) + 2.0 * self.alpha * x

    def d2phi(self, x):
        return -(HALF_PI**2) * np.sin(HALF_PI * x) + 2.0 * self.alpha


@dataclass(frozen=True)
class HeatProfile:
    """psi with k psi'' + psi = s phi', psi(0) = psi(1) = 0."""

    A: float
    B: float
    C1: float
    C2: float
    kappa: float

    @classmethod
    def solve(cls, k: float, s: float, alpha: float) -> "HeatProfile":
        kappa = 1.0 / math.sqrt(k)
        resonance = kappa**2 - HALF_PI**2
        if abs(resonance) < 1e-9 or abs(math.sin(kappa)) < 1e-9:
            raise ValueError("heat profile is resonant for this k")
        A = (s * HALF_PI / k) / resonance
        B = 2.0 * alpha * s
        C1 = -A
        C2 = (A * math.cos(kappa) - B) / math.sin(kappa)
        return cls(A, B, C1, C2, kappa)

    def psi(self, x):
        q = self.kappa
        return self.A * np.cos(HALF_PI * x) + self.B * x + self.C1 * np.cos(q * x) + self.C2 * np.sin(q * x)

    def dpsi(self, x):
        q = self.kappa
        return (
            -self.A * HALF_PI * np.sin(HALF_PI * x)
            + self.B
            - self.C1 * q * np.sin(q * x)
            + self.C2 * q * np.cos(q * x)
        )


def _decay(amplitude: float = 1.0) -> TimeSignal:
    return TimeSignal("exponential", amplitude=amplitude, rate=1.0)


def damper_alpha(a: float) -> float:
    if abs(a - 2.0) < 1e-12:
        raise ValueError("a = 2 has no quadratic correction; pick another gain")
    return a / (2.0 - a)


@dataclass(frozen=True)
class StringMMS:
    variant: ModelVariant
    params: PhysicalParams
    profile: Profile
    heat: HeatProfile | None

    @classmethod
    def build(cls, variant: ModelVariant | str, params: PhysicalParams) -> "StringMMS":
        variant = ModelVariant(variant)
        if variant is ModelVariant.A:
            raise ValueError("variant A has no inputs to manufacture a solution with")
        alpha = damper_alpha(params.a) if variant is ModelVariant.D else 0.0
        heat = HeatProfile.solve(params.k, -params.lam, alpha) if variant.thermal else None
        return cls(variant, params, Profile(alpha), heat)

    def exact(self, t: float, grid: Grid) -> StringState:
        x, e = grid.x, math.exp(-t)
        theta = None if self.heat is None else e * self.heat.psi(x)
        return StringState(t, e * self.profile.phi(x), -e * self.profile.phi(x), theta)

    def initial(self, grid: Grid) -> InitialData:
        s = self.exact(0.0, grid)
        return InitialData(s.u, s.w, s.theta)

    def disturbance(self, grid: Grid) -> DisturbanceSpec:
        p, P, x = self.params, self.profile, grid.x
        sigma = p.sigma if self.variant.kelvin_voigt else 0.0
        bracket = P.phi(x) - p.c**2 * P.d2phi(x) + sigma * P.d2phi(x) - p.mu * P.phi(x)
        if self.heat is not None:
            bracket = bracket + p.b * self.heat.dpsi(x)
        f = SpaceTimeSignal("separable", g=_decay(), profile=tuple(bracket))
        mismatch = float(P.dphi(1.0) - p.a * P.phi(1.0))
        d = _decay(mismatch) if self.variant is not ModelVariant.D else TimeSignal()
        return DisturbanceSpec(f=f, d=d)


@dataclass(frozen=True)
class ThermoacousticMMS:
    params: ThermoacousticParams
    profile: Profile
    heat: HeatProfile

    @classmethod
    def build(cls, params: ThermoacousticParams) -> "ThermoacousticMMS":
        alpha = damper_alpha(params.a)
        return cls(params, Profile(alpha), HeatProfile.solve(params.k, params.lam, alpha))

    def exact(self, t: float, grid: Grid) -> ThermoState:
        x, e = grid.x, math.exp(-t)
        g = self.params.gamma_fluid
        return ThermoState(t, g * e * self.profile.dphi(x), e * self.profile.phi(x), e * self.heat.psi(x))

    def initial(self, grid: Grid) -> ThermoInitialData:
        s = self.exact(0.0, grid)
        return ThermoInitialData(s.rho, s.v, s.theta)

    def disturbance(self, grid: Grid) -> DisturbanceSpec:
        p, P, x = self.params, self.profile, grid.x
        bracket = -P.phi(x) + (p.c**2 - p.sigma) * P.d2phi(x) + p.b * self.heat.dpsi(x)
        return DisturbanceSpec(f=SpaceTimeSignal("separable", g=_decay(), profile=tuple(bracket)))
