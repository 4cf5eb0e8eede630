"""Closed-form ISS constants for the viscous (B), thermal (C) and
Kelvin-Voigt (D) string models, and a search over the free weight r.

Every max/min records which argument was active in ``branches`` so the
certificate can be audited by hand.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from waveiss.model import ModelVariant, PhysicalParams, validate

THM3_MARGIN = 1.01
THEOREM_VARIANT = {1: ModelVariant.B, 2: ModelVariant.C, 3: ModelVariant.D}


@dataclass(frozen=True)
class IssCertificate:
    theorem: int
    params: PhysicalParams
    r: float
    M: float
    omega: float
    G: float
    sandwich_lower: float
    sandwich_upper: float
    K1: float | None = None
    K2: float | None = None
    gamma1: float | None = None
    gamma2: float | None = None
    K: float | None = None
    gamma: float | None = None
    B: float | None = None
    Q: float | None = None
    R: float | None = None
    C1: float | None = None
    C2: float | None = None
    phi_rate: float | None = None
    branches: dict[str, str] = field(default_factory=dict)
    margins: dict[str, float] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def variant(self) -> ModelVariant:
        return THEOREM_VARIANT[self.theorem]

    def gains(self) -> tuple[float, float]:
        """(gain on sup|f|, gain on sup|d|); the latter is 0 for the Kelvin-Voigt certificate."""
        if self.theorem == 3:
            return float(self.gamma), 0.0
        return float(self.gamma1), float(self.gamma2)

    def to_dict(self) -> dict:
        out = {
            name: getattr(self, name)
            for name in self.__dataclass_fields__
            if name not in ("params", "notes")
        }
        out["params"] = self.params.as_dict()
        out["notes"] = list(self.notes)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _argmax(named: dict[str, float]) -> tuple[str, float]:
    name = max(named, key=lambda k: named[k])
    return name, named[name]


def _argmin(named: dict[str, float]) -> tuple[str, float]:
    name = min(named, key=lambda k: named[k])
    return name, named[name]


def _check(params: PhysicalParams, r: float, theorem: int) -> None:
    if not (isinstance(r, (int, float)) and r > 0 and math.isfinite(r)):
        raise ValueError(f"r must be a finite number > 0, got {r!r}")
    validate(params, THEOREM_VARIANT[theorem]).raise_if_invalid()


def boundary_bound(params: PhysicalParams, r: float) -> float:
    """(1/(ac)) (e^r (1-ac)^2 - e^{-r} (1+ac)^2)."""
    ac = params.a * params.c
    return (math.exp(r) * (1.0 - ac) ** 2 - math.exp(-r) * (1.0 + ac) ** 2) / ac


def boundary_gain(params: PhysicalParams, r: float, M: float) -> float:
    """Coefficient of |d|^2 in the Lyapunov differential inequality."""
    a, c = params.a, params.c
    return c**2 * (
        M / (2.0 * a)
        + 4.0 * (math.cosh(r) - a * c * math.sinh(r)) ** 2 / (a * M)
        + c * math.sinh(r)
    )


def thm1_certificate(params: PhysicalParams, r: float) -> IssCertificate:
    """Viscous damping with passive damper (variant B)."""
    _check(params, r, 1)
    a, c, mu = params.a, params.c, params.mu
    branch, M = _argmax(
        {
            "viscous": 2.0 * (1.0 + mu) / (c * r) * math.cosh(r),
            "boundary": 2.0 * boundary_bound(params, r),
        }
    )
    em = math.exp(-r)
    omega = c * r * em / (4.0 * (M + 2.0 * em))
    K1 = (2.0 * (1.0 + mu) + M**2) * math.cosh(r) / (2.0 * omega * c * r)
    K2 = boundary_gain(params, r, M) / (2.0 * omega)
    lo, hi = M / 2.0 + em, M / 2.0 + math.exp(r)
    c2min, c2max = min(1.0, c * c), max(1.0, c * c)
    G = math.sqrt(hi / lo) * math.sqrt(c2max / c2min)
    gamma1 = math.sqrt(2.0 * K1 / ((M + 2.0 * em) * c2min))
    gamma2 = gamma1 * math.sqrt(K2 / K1)
    return IssCertificate(
        theorem=1,
        params=params,
        r=float(r),
        M=M,
        omega=omega,
        G=G,
        sandwich_lower=lo,
        sandwich_upper=hi,
        K1=K1,
        K2=K2,
        gamma1=gamma1,
        gamma2=gamma2,
        branches={"M": branch},
        notes=("sandwich coefficients multiply c^2|u_x|^2 + |w|^2",),
    )


def thm2_certificate(params: PhysicalParams, r: float) -> IssCertificate:
    """Viscous and thermal damping (variant C)."""
    _check(params, r, 2)
    a, c, mu, b, k, lam = params.a, params.c, params.mu, params.b, params.k, params.lam
    heat_branch, heat_factor = _argmax({"one": 1.0, "2lam/k": 2.0 * lam / k})
    branch, M = _argmax(
        {
            "viscous_thermal": heat_factor * 2.0 * (1.0 + b + mu) / (c * r) * math.cosh(r),
            "boundary": 2.0 * boundary_bound(params, r),
        }
    )
    omega_branch, rate = _argmin(
        {"mechanical": c * r / (2.0 * (2.0 + M * math.exp(r))), "thermal": k * math.pi**2}
    )
    omega = 0.5 * rate
    K1 = (2.0 * (1.0 + b + mu) + M**2) * math.cosh(r) / (2.0 * omega * c * r)
    K2 = boundary_gain(params, r, M) / (2.0 * omega)
    lo_branch, lo = _argmin(
        {"mechanical": min(1.0, c * c) * (M / 2.0 + math.exp(-r)), "thermal": b * M / (2.0 * lam)}
    )
    hi_branch, hi = _argmax(
        {"mechanical": max(1.0, c * c) * (M / 2.0 + math.exp(r)), "thermal": b * M / (2.0 * lam)}
    )
    return IssCertificate(
        theorem=2,
        params=params,
        r=float(r),
        M=M,
        omega=omega,
        G=math.sqrt(hi / lo),
        sandwich_lower=lo,
        sandwich_upper=hi,
        K1=K1,
        K2=K2,
        gamma1=math.sqrt(K1 / lo),
        gamma2=math.sqrt(K2 / lo),
        branches={
            "M.heat_factor": heat_branch,
            "M": branch,
            "omega": omega_branch,
            "sandwich_lower": lo_branch,
            "sandwich_upper": hi_branch,
        },
        notes=(
            "G = sqrt(upper/lower), gamma1 = sqrt(K1/lower), gamma2 = sqrt(K2/lower) "
            "from the squared estimate via sqrt(x+y+z) <= sqrt(x)+sqrt(y)+sqrt(z)",
            "sandwich coefficients multiply |w|^2 + |u_x|^2 + |theta|^2",
        ),
    )


def kelvin_voigt_B(params: PhysicalParams, r: float) -> float:
    """Boundary weight a*sigma*(e^r (1-ac) + e^{-r} (1+ac)) of the variant-D functional."""
    a, c, s = params.a, params.c, params.sigma
    return a * s * (math.exp(r) * (1.0 - a * c) + math.exp(-r) * (1.0 + a * c))


def kelvin_voigt_Q(params: PhysicalParams) -> float:
    c2, s, b, mu = params.c**2, params.sigma, params.b, params.mu
    return (c2 + (1.0 + b) * s) / (2.0 * s) + s * c2 * (1.0 + b) / (2.0 * (c2 + (1.0 + mu + b) * s))


def thm3_lower_bounds(params: PhysicalParams, r: float, R: float, B: float) -> dict[str, float]:
    """The six lower bounds on M; the last two are strict."""
    a, c, mu, b, k, lam, s = (params.a, params.c, params.mu, params.b, params.k, params.lam, params.sigma)
    lump = 1.0 + mu + b + s * r
    viscous = 2.0 * lump / (c * r) * math.cosh(r)
    heat_w = (s + 1.0) / (2.0 * s * c**2) * (c**2 + (1.0 + mu + b) * s) * R
    return {
        "strain_rate": 2.0 * lump / c * math.cosh(r) + 4.0 * math.sinh(r) ** 2 / (c * R),
        "viscous": (1.0 + mu + b) * s * R / (2.0 * c**2) + viscous,
        "thermal": 2.0 * lam / k * (viscous + heat_w),
        "boundary": boundary_bound(params, r),
        "velocity_weight": R - 2.0 * math.exp(-r),
        "boundary_weight": -B / (a * s),
    }


STRICT_BOUNDS = ("velocity_weight", "boundary_weight")


def thm3_certificate(params: PhysicalParams, r: float) -> IssCertificate:
    """Viscous, thermal and Kelvin-Voigt damping (variant D).

    M is the largest of the six lower bounds times :data:`THM3_MARGIN`.
    """
    _check(params, r, 3)
    a, c, mu, b, k, lam, s = (params.a, params.c, params.mu, params.b, params.k, params.lam, params.sigma)
    B = kelvin_voigt_B(params, r)
    Q = kelvin_voigt_Q(params)
    R = c * r / (8.0 * Q * math.cosh(r))
    bounds = thm3_lower_bounds(params, r, R, B)
    m_branch, binding = _argmax(bounds)
    assert binding > 0, "the strain-rate bound is always positive"
    M = THM3_MARGIN * binding
    margins = {}
    for name, value in bounds.items():
        margins[name] = M - value
        margins[f"{name}.relative"] = (M - value) / binding

    em, ep = math.exp(-r), math.exp(r)
    c1_branch, C1 = _argmin(
        {
            "velocity": (M - R) / 2.0 + em,
            "strain": c**2 * (M / 2.0 + em),
            "thermal": b * M / (2.0 * lam),
            "boundary_velocity": (a * s * M + B) / 2.0,
            "curvature": R * s**2 / 4.0,
        }
    )
    c2_branch, C2 = _argmax(
        {
            "velocity": M / 2.0 + ep + R,
            "strain": c**2 * (M / 2.0 + ep),
            "thermal": b * M / (2.0 * lam),
            "boundary_velocity": (a * s * M + B) / 2.0,
            "curvature": R * s**2,
        }
    )
    phi_branch, phi_rate = _argmin(
        {
            "velocity": c * r * em / 8.0,
            "strain": c**3 * r * em / 8.0,
            "boundary_velocity": a * c**2 * M / 2.0,
            "curvature": s * c**2 * R / 4.0,
            "thermal": b * k * M * math.pi**2 / (2.0 * lam),
        }
    )
    omega = phi_rate / (2.0 * C2)
    K = (
        (s + 1.0) / (2.0 * s * c**2) * (c**2 + (1.0 + mu + b) * s) * R
        + 2.0 * (1.0 + mu + b + s * r) / (c * r) * math.cosh(r)
        + M**2 / (4.0 * Q * R)
    )
    return IssCertificate(
        theorem=3,
        params=params,
        r=float(r),
        M=M,
        omega=omega,
        G=math.sqrt(C2 / C1),
        sandwich_lower=C1,
        sandwich_upper=C2,
        K=K,
        gamma=math.sqrt(K / (2.0 * omega * C1)),
        B=B,
        Q=Q,
        R=R,
        C1=C1,
        C2=C2,
        phi_rate=phi_rate,
        branches={"M": m_branch, "C1": c1_branch, "C2": c2_branch, "phi_rate": phi_branch},
        margins=margins,
        notes=(
            f"M = {THM3_MARGIN} x max of the six lower bounds",
            "G = sqrt(C2/C1), gamma = sqrt(K/(2 omega C1)) from the squared estimate",
            "sandwich coefficients multiply |w|^2 + |u_x|^2 + |theta|^2 + w(1)^2 + |u_xx|^2",
        ),
    )


_BUILDERS: dict[int, Callable[[PhysicalParams, float], IssCertificate]] = {
    1: thm1_certificate,
    2: thm2_certificate,
    3: thm3_certificate,
}


def certificate(theorem: int, params: PhysicalParams, r: float) -> IssCertificate:
    return _BUILDERS[theorem](params, r)


def certificate_for(variant: ModelVariant | str, params: PhysicalParams, r: float) -> IssCertificate:
    theorem = ModelVariant(variant).theorem
    if theorem is None:
        raise ValueError(f"no ISS certificate for variant {variant}")
    return certificate(theorem, params, r)


NUMERIC_FIELDS = (
    "M", "omega", "G", "sandwich_lower", "sandwich_upper", "K1", "K2", "gamma1", "gamma2",
    "K", "gamma", "B", "Q", "R", "C1", "C2", "phi_rate",
)


def recompute_mismatches(cert: IssCertificate, rtol: float = 1e-12) -> dict[str, tuple[float, float]]:
    """Fields whose stored value differs from a fresh evaluation by more than ``rtol``."""
    fresh = certificate(cert.theorem, cert.params, cert.r)
    bad = {}
    for name in NUMERIC_FIELDS:
        old, new = getattr(cert, name), getattr(fresh, name)
        if old is None and new is None:
            continue
        if old is None or new is None or not math.isclose(old, new, rel_tol=rtol, abs_tol=0.0):
            bad[name] = (old, new)
    if fresh.branches != cert.branches:
        bad["branches"] = (cert.branches, fresh.branches)  # type: ignore[assignment]
    return bad


# --------------------------------------------------------------------------
# Choice of r
# --------------------------------------------------------------------------

OBJECTIVES = ("maximize_omega", "minimize_gamma1")
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RSearchResult:
    r_star: float
    certificate: IssCertificate
    objective: str
    value: float
    at_lower_bound: bool
    at_upper_bound: bool
    evaluations: int


def _score(objective: str, cert: IssCertificate) -> float:
    """Quantity to minimise."""
    if objective == "maximize_omega":
        return -cert.omega
    return cert.gamma if cert.theorem == 3 else cert.gamma1


def golden_section_min(fn: Callable[[float], float], lo: float, hi: float, tol: float = 1e-8) -> float:
    """Golden-section search for a minimiser of ``fn`` on [lo, hi]."""
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = fn(x1), fn(x2)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = fn(x2)
    return x1 if f1 <= f2 else x2


def optimize_r(
    theorem: int,
    params: PhysicalParams,
    r_range: tuple[float, float],
    objective: str = "maximize_omega",
    resolution: float = 1e-3,
) -> RSearchResult:
    """Golden-section search plus a grid pass at ``resolution``; ties go to smaller r."""
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    lo, hi = map(float, r_range)
    if not (0 < lo <= hi) or not math.isfinite(hi):
        raise ValueError(f"empty or invalid r range {r_range}")
    build = _BUILDERS[theorem]
    cache: dict[float, float] = {}

    def score(r: float) -> float:
        if r not in cache:
            cache[r] = _score(objective, build(params, r))
        return cache[r]

    candidates = [lo, hi]
    if hi > lo:
        candidates.append(golden_section_min(score, lo, hi))
        n = int(math.floor((hi - lo) / resolution))
        candidates.extend(lo + resolution * np.arange(1, n + 1))
    best = min(sorted(set(float(r) for r in candidates)), key=lambda r: (score(r), r))
    cert = build(params, best)
    return RSearchResult(
        r_star=best,
        certificate=cert,
        objective=objective,
        value=-score(best) if objective == "maximize_omega" else score(best),
        at_lower_bound=hi > lo and best == lo,
        at_upper_bound=hi > lo and best == hi,
        evaluations=len(cache),
    )
