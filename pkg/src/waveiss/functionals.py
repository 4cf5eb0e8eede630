"""Energies and Lyapunov functionals on discrete states (trapezoid rule).

u_x comes from :func:`~waveiss.discretize.first_diff`; u_xx from
:func:`~waveiss.discretize.second_diff` with the solver's closure
u_x(1) = -a*w(1) + d, so the functionals see the same operators as the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from waveiss.certificates import IssCertificate, kelvin_voigt_B
from waveiss.discretize import Grid, first_diff, second_diff, trapz
from waveiss.model import ModelVariant, PhysicalParams
from waveiss.solver import StringState

# Frozen engineering margin for O(h^2 + dt^2) discretisation slack.
SLACK_FACTOR = 10.0


def slack(h: float, dt: float = 0.0, scale: float = 1.0) -> float:
    return SLACK_FACTOR * (h * h + dt * dt) * scale


@dataclass(frozen=True)
class FunctionalValue:
    E: float
    Phi: float
    V: float
    W_kv: float | None = None
    components: dict[str, float] = field(default_factory=dict)


def _theta(state: StringState, variant: ModelVariant) -> np.ndarray:
    if state.theta is None:
        raise ValueError(f"variant {variant.value} needs a temperature field")
    return state.theta


def u_xx(state: StringState, params: PhysicalParams, d: float = 0.0) -> np.ndarray:
    return second_diff(state.grid, state.u, -params.a * state.w[-1] + d)


def energy_components(variant: ModelVariant | str, params: PhysicalParams, state: StringState) -> dict[str, float]:
    variant = ModelVariant(variant)
    grid = state.grid
    ux = first_diff(grid, state.u)
    comps = {
        "kinetic": 0.5 * trapz(grid, state.w**2),
        "potential": 0.5 * params.c**2 * trapz(grid, ux**2),
    }
    if variant.thermal:
        comps["thermal"] = params.b / (2.0 * params.lam) * trapz(grid, _theta(state, variant) ** 2)
    if variant.kelvin_voigt:
        comps["boundary_velocity"] = 0.5 * params.a * params.sigma * state.w[-1] ** 2
    return comps


def energy_E(variant: ModelVariant | str, params: PhysicalParams, state: StringState) -> float:
    """Mechanical energy (A/B) or its thermal / Kelvin-Voigt extension (C/D)."""
    return math.fsum(energy_components(variant, params, state).values())


def phi_components(
    variant: ModelVariant | str, params: PhysicalParams, state: StringState, r: float
) -> dict[str, float]:
    variant = ModelVariant(variant)
    grid = state.grid
    x = grid.x
    cux = params.c * first_diff(grid, state.u)
    comps = {
        "forward": 0.5 * trapz(grid, np.exp(r * x) * (state.w + cux) ** 2),
        "backward": 0.5 * trapz(grid, np.exp(-r * x) * (state.w - cux) ** 2),
    }
    if variant.kelvin_voigt:
        comps["boundary"] = 0.5 * kelvin_voigt_B(params, r) * state.w[-1] ** 2
    return comps


def phi(variant: ModelVariant | str, params: PhysicalParams, state: StringState, r: float) -> float:
    """Weighted Riemann-invariant functional; may be negative for D when B < 0."""
    if not r > 0:
        raise ValueError("r must be > 0")
    return math.fsum(phi_components(variant, params, state, r).values())


def w_kv(state: StringState, params: PhysicalParams, d: float = 0.0) -> float:
    """Half the squared L2 norm of w - sigma*u_xx; ``d`` enters the slope at x = 1."""
    return 0.5 * trapz(state.grid, (state.w - params.sigma * u_xx(state, params, d)) ** 2)


def lyapunov_V(
    variant: ModelVariant | str, params: PhysicalParams, state: StringState, cert: IssCertificate
) -> FunctionalValue:
    variant = ModelVariant(variant)
    if cert.theorem != variant.theorem:
        raise ValueError(f"certificate for theorem {cert.theorem} does not match variant {variant.value}")
    if cert.params != params:
        raise ValueError("certificate was computed for different parameters")
    e = energy_components(variant, params, state)
    p = phi_components(variant, params, state, cert.r)
    E, Phi = math.fsum(e.values()), math.fsum(p.values())
    components = {f"E.{k}": v for k, v in e.items()} | {f"Phi.{k}": v for k, v in p.items()}
    W = None
    V = Phi + cert.M * E
    if variant.kelvin_voigt:
        W = w_kv(state, params)
        components["W"] = W
        V += cert.R * W
    return FunctionalValue(E=E, Phi=Phi, V=V, W_kv=W, components=components)


@dataclass(frozen=True)
class StateNorms:
    w: float
    u_x: float
    theta: float | None = None
    u_xx: float | None = None
    w_at_1: float | None = None

    @property
    def squared_total(self) -> float:
        parts = [self.w**2, self.u_x**2]
        parts += [v**2 for v in (self.theta, self.u_xx, self.w_at_1) if v is not None]
        return math.fsum(parts)

    @property
    def total(self) -> float:
        """Left-hand side of the ISS estimate for this variant."""
        return math.sqrt(self.squared_total)


def state_norms(
    variant: ModelVariant | str, state: StringState, params: PhysicalParams | None = None, d: float = 0.0
) -> StateNorms:
    variant = ModelVariant(variant)
    grid = state.grid
    nw = math.sqrt(trapz(grid, state.w**2))
    nux = math.sqrt(trapz(grid, first_diff(grid, state.u) ** 2))
    theta = math.sqrt(trapz(grid, _theta(state, variant) ** 2)) if variant.thermal else None
    if variant.kelvin_voigt:
        if params is None:
            raise ValueError("variant D norms need params for the u_xx boundary closure")
        nuxx = math.sqrt(trapz(grid, u_xx(state, params, d) ** 2))
        return StateNorms(nw, nux, theta, nuxx, abs(float(state.w[-1])))
    return StateNorms(nw, nux, theta)


def sandwich_norm(variant: ModelVariant | str, params: PhysicalParams, state: StringState) -> float:
    """The squared quantity the Lyapunov sandwich is stated in.

    B: c^2|u_x|^2 + |w|^2.  C: |w|^2 + |u_x|^2 + |theta|^2.
    D: |w|^2 + |u_x|^2 + |theta|^2 + w(1)^2 + |u_xx|^2.
    """
    variant = ModelVariant(variant)
    n = state_norms(variant, state, params)
    if variant in (ModelVariant.A, ModelVariant.B):
        return params.c**2 * n.u_x**2 + n.w**2
    return n.squared_total


def riemann_weighted_sum(params: PhysicalParams, state: StringState, r: float) -> float:
    """int e^{rx}(w + c u_x)^2 + int e^{-rx}(w - c u_x)^2."""
    grid = state.grid
    x = grid.x
    cux = params.c * first_diff(grid, state.u)
    return trapz(grid, np.exp(r * x) * (state.w + cux) ** 2) + trapz(grid, np.exp(-r * x) * (state.w - cux) ** 2)
