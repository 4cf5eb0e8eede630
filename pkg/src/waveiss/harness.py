"""Verification experiments along discrete trajectories."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from waveiss.certificates import IssCertificate, thm3_certificate
from waveiss.discretize import Grid, l2_norm
from waveiss.functionals import SLACK_FACTOR, energy_E, lyapunov_V, slack, state_norms
from waveiss.model import (
    NO_DISTURBANCE,
    DisturbanceSpec,
    InitialData,
    ModelVariant,
    PhysicalParams,
    ThermoacousticParams,
    ThermoInitialData,
)
from waveiss.solver import StringState, Trajectory, default_dt, run, run_thermoacoustic

FINITE_TIME_THRESHOLD = 1e-10
DECAY_TOLERANCE = 0.05
MIN_FIT_SAMPLES = 10

InitFactory = Callable[[Grid], InitialData]
DisturbanceFactory = Callable[[Grid], DisturbanceSpec]


def _check_cert(variant: ModelVariant, params: PhysicalParams, cert: IssCertificate) -> None:
    if cert.theorem != variant.theorem:
        raise ValueError(f"certificate for theorem {cert.theorem} does not match variant {variant.value}")
    if cert.params != params:
        raise ValueError("certificate was computed for different parameters")


# --------------------------------------------------------------------------
# ISS estimate
# --------------------------------------------------------------------------


@dataclass
class IssCheckReport:
    variant: str
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    margin: np.ndarray
    slack: float
    slack_factor: float = SLACK_FACTOR

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margin))

    @property
    def passed(self) -> bool:
        return self.min_margin >= -self.slack

    @property
    def discretization_level_steps(self) -> int:
        """Steps violating the exact inequality but within the slack band."""
        return int(np.sum((self.margin < 0) & (self.margin >= -self.slack)))

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "steps": int(self.times.size),
            "min_margin": self.min_margin,
            "slack": self.slack,
            "slack_factor": self.slack_factor,
            "passed": self.passed,
            "discretization_level_steps": self.discretization_level_steps,
        }


def check_iss(
    variant: ModelVariant | str, params: PhysicalParams, cert: IssCertificate, trajectory: Trajectory
) -> IssCheckReport:
    """Compare both sides of the square-root ISS estimate at every step."""
    variant = ModelVariant(variant)
    _check_cert(variant, params, cert)
    if trajectory.variant is not variant or trajectory.params != params:
        raise ValueError("trajectory was produced by a different model")
    lhs = np.array(
        [state_norms(variant, s, params, 0.0).total for s in trajectory.states()]
    )
    gf, gd = cert.gains()
    sup_f = np.maximum.accumulate(trajectory.f_norms)
    sup_d = np.maximum.accumulate(trajectory.d_abs)
    rhs = cert.G * np.exp(-cert.omega * trajectory.times) * lhs[0] + gf * sup_f + gd * sup_d
    return IssCheckReport(
        variant=variant.value,
        times=trajectory.times,
        lhs=lhs,
        rhs=rhs,
        margin=rhs - lhs,
        slack=slack(trajectory.grid.h, trajectory.dt, 1.0 + lhs[0]),
    )


@dataclass
class LyapunovSeries:
    times: np.ndarray
    V: np.ndarray
    E: np.ndarray
    Phi: np.ndarray
    W: np.ndarray | None


def lyapunov_series(
    variant: ModelVariant | str, params: PhysicalParams, cert: IssCertificate, trajectory: Trajectory
) -> LyapunovSeries:
    values = [lyapunov_V(variant, params, s, cert) for s in trajectory.states()]
    W = None
    if ModelVariant(variant).kelvin_voigt:
        W = np.array([v.W_kv for v in values])
    return LyapunovSeries(
        trajectory.times,
        np.array([v.V for v in values]),
        np.array([v.E for v in values]),
        np.array([v.Phi for v in values]),
        W,
    )


@dataclass
class DissipationReport:
    """Discrete form of dV/dt <= -2 omega V + k_f |f|^2 + k_d |d|^2."""

    excess: np.ndarray
    tolerance: float
    exponential_margin: np.ndarray
    exponential_tolerance: float
    monotone_excess: np.ndarray

    @property
    def differential_ok(self) -> bool:
        return bool(np.max(self.excess, initial=-np.inf) <= self.tolerance)

    @property
    def exponential_ok(self) -> bool:
        return bool(np.min(self.exponential_margin) >= -self.exponential_tolerance)

    @property
    def monotone_ok(self) -> bool:
        return bool(np.max(self.monotone_excess, initial=-np.inf) <= self.exponential_tolerance)


def check_dissipation(
    variant: ModelVariant | str,
    params: PhysicalParams,
    cert: IssCertificate,
    trajectory: Trajectory,
    series: LyapunovSeries | None = None,
) -> DissipationReport:
    """Per-step checks of the Lyapunov inequalities.

    ``exponential_margin`` is V(0) e^{-2 omega t}(1 + tol) - V(t) and is only
    meaningful for undisturbed runs; ``monotone_excess`` is the step increase
    V_{n+1} - V_n against the band tol*V(0).
    """
    variant = ModelVariant(variant)
    _check_cert(variant, params, cert)
    series = series or lyapunov_series(variant, params, cert, trajectory)
    V, dt = series.V, trajectory.dt
    if cert.theorem == 3:
        kf, kd = cert.K, 0.0
    else:
        kf, kd = 2.0 * cert.omega * cert.K1, 2.0 * cert.omega * cert.K2
    band = SLACK_FACTOR * (trajectory.grid.h**2 + dt**2)
    f2 = np.maximum(trajectory.f_norms[:-1], trajectory.f_norms[1:]) ** 2
    d2 = np.maximum(trajectory.d_abs[:-1], trajectory.d_abs[1:]) ** 2
    excess = (V[1:] - V[:-1]) / dt - (-2.0 * cert.omega * V[:-1] + kf * f2 + kd * d2)
    return DissipationReport(
        excess=excess,
        tolerance=band * (1.0 + V[0]),
        exponential_margin=V[0] * np.exp(-2.0 * cert.omega * series.times) * (1.0 + band) - V,
        exponential_tolerance=band * V[0],
        monotone_excess=V[1:] - V[:-1],
    )


# --------------------------------------------------------------------------
# Decay rate
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    rate: float
    residual: float
    samples: int
    window: tuple[float, float]
    certified_rate: float | None = None
    finite_time: bool = False
    finite_time_at: float | None = None

    @property
    def ratio(self) -> float | None:
        if not self.certified_rate:
            return None
        return self.rate / self.certified_rate

    @property
    def conservative(self) -> bool | None:
        """Fitted rate is at least 95% of the certified rate 2*omega."""
        if self.certified_rate is None:
            return None
        return self.finite_time or self.rate >= self.certified_rate * (1.0 - DECAY_TOLERANCE)


def fit_decay(
    times: Sequence[float],
    values: Sequence[float],
    omega: float | None = None,
    threshold: float = FINITE_TIME_THRESHOLD,
) -> DecayFit:
    """Least-squares slope of log(values) over the tail half of the series.

    If the series drops below ``threshold * values[0]`` the run is flagged as
    finite-time and the window is the tail half of the part before the drop.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or v.size == 0:
        raise ValueError("times and values must be non-empty and of equal length")
    if v[0] <= 0:
        raise ValueError("series must start positive")
    below = np.nonzero(v < threshold * v[0])[0]
    finite = below.size > 0
    stop = int(below[0]) if finite else v.size
    start = stop // 2
    if stop - start < MIN_FIT_SAMPLES:
        start = max(0, stop - MIN_FIT_SAMPLES)
    if stop - start < MIN_FIT_SAMPLES or np.any(v[start:stop] <= 0):
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} positive samples in the fit window")
    tw, lv = t[start:stop], np.log(v[start:stop])
    slope, intercept = np.polyfit(tw, lv, 1)
    resid = float(np.sqrt(np.mean((lv - (slope * tw + intercept)) ** 2)))
    return DecayFit(
        rate=float(-slope),
        residual=resid,
        samples=int(stop - start),
        window=(float(tw[0]), float(tw[-1])),
        certified_rate=None if omega is None else 2.0 * omega,
        finite_time=finite,
        finite_time_at=float(t[stop]) if finite else None,
    )


def energy_series(variant: ModelVariant | str, params: PhysicalParams, trajectory: Trajectory) -> np.ndarray:
    return np.array([energy_E(variant, params, s) for s in trajectory.states()])


# --------------------------------------------------------------------------
# Convergence
# --------------------------------------------------------------------------


@dataclass
class ConvergenceTable:
    N: list[int]
    errors: list[float]
    pairwise_orders: list[float]
    order: float
    reference: str

    def as_dict(self) -> dict:
        return asdict(self)


def _as_factory(obj, kind):
    if obj is None:
        return lambda grid: NO_DISTURBANCE
    return obj if callable(obj) and not isinstance(obj, kind) else (lambda grid: obj)


def _order(N: Sequence[int], errors: Sequence[float]) -> tuple[list[float], float]:
    e = np.asarray(errors, dtype=float)
    n = np.asarray(N, dtype=float)
    pair = [
        float(math.log(e[i] / e[i + 1]) / math.log(n[i + 1] / n[i])) if e[i] > 0 and e[i + 1] > 0 else float("nan")
        for i in range(len(e) - 1)
    ]
    keep = e > 0
    if keep.sum() < 2:
        return pair, float("nan")
    slope = np.polyfit(np.log(n[keep]), np.log(e[keep]), 1)[0]
    return pair, float(-slope)


def convergence_study(
    variant: ModelVariant | str,
    params: PhysicalParams,
    N_list: Sequence[int],
    T: float,
    init: InitFactory,
    disturbance: DisturbanceSpec | DisturbanceFactory | None = None,
    exact: Callable[[float, Grid], StringState] | None = None,
    courant: float = 1.0,
) -> ConvergenceTable:
    """Max nodal displacement error at the final time.

    With ``exact`` the error is against the exact solution on every grid;
    otherwise against the finest grid, restricted to the shared nodes.
    """
    N_list = [int(n) for n in N_list]
    if len(N_list) < 3 or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be ascending with at least 3 entries")
    if exact is None and any(N_list[-1] % n for n in N_list):
        raise ValueError("self-convergence needs nested grids (finest N divisible by every N)")
    dist = _as_factory(disturbance, DisturbanceSpec)
    finals = []
    for N in N_list:
        grid = Grid(N)
        traj = run(variant, params, grid, init(grid), dist(grid), default_dt(grid, params.c, courant), T)
        finals.append((grid, traj.final))
    t_end = finals[0][1].t
    if any(abs(s.t - t_end) > 1e-9 for _, s in finals):
        raise ValueError("final times differ between grids; choose T commensurate with every dt")

    if exact is not None:
        errors = [float(np.max(np.abs(s.u - exact(s.t, g).u))) for g, s in finals]
        pair, order = _order(N_list, errors)
        return ConvergenceTable(N_list, errors, pair, order, "exact")

    g_fine, s_fine = finals[-1]
    errors = [
        float(np.max(np.abs(s.u - s_fine.u[:: N_list[-1] // g.N]))) for g, s in finals[:-1]
    ]
    pair, order = _order(N_list[:-1], errors)
    return ConvergenceTable(N_list[:-1], errors, pair, order, f"finest N={N_list[-1]}")


# --------------------------------------------------------------------------
# sigma -> 0
# --------------------------------------------------------------------------


@dataclass
class SigmaSweep:
    rows: list[dict[str, float]]

    def _seq(self, key: str) -> np.ndarray:
        return np.array([row[key] for row in self.rows])

    @property
    def gamma_increasing(self) -> bool | None:
        return None if len(self.rows) < 2 else bool(np.all(np.diff(self._seq("gamma")) > 0))

    @property
    def C1_decreasing(self) -> bool | None:
        return None if len(self.rows) < 2 else bool(np.all(np.diff(self._seq("C1")) < 0))

    @property
    def omega_decreasing(self) -> bool | None:
        return None if len(self.rows) < 2 else bool(np.all(np.diff(self._seq("omega")) < 0))

    @property
    def monotone(self) -> bool | None:
        flags = (self.gamma_increasing, self.C1_decreasing)
        return None if flags[0] is None else all(flags)


def sigma_sweep(params_base: PhysicalParams, sigma_list: Sequence[float], r: float = 1.0) -> SigmaSweep:
    sigma_list = [float(s) for s in sigma_list]
    if not sigma_list or any(s <= 0 for s in sigma_list):
        raise ValueError("sigma_list must hold positive values")
    if any(b >= a for a, b in zip(sigma_list, sigma_list[1:])):
        raise ValueError("sigma_list must be strictly descending")
    rows = []
    for s in sigma_list:
        cert = thm3_certificate(params_base.replace(sigma=s), r)
        rows.append(
            {"sigma": s, "gamma": cert.gamma, "omega": cert.omega, "C1": cert.C1, "K": cert.K, "M": cert.M}
        )
    return SigmaSweep(rows)


# --------------------------------------------------------------------------
# Thermoacoustic equivalence
# --------------------------------------------------------------------------

ThermoInitFactory = Callable[[Grid], ThermoInitialData]


def string_twin_initial(params: ThermoacousticParams, init: ThermoInitialData) -> InitialData:
    """u0 = -(1/gamma) * integral of rho0 from 0, so that rho = -gamma u_x."""
    grid = Grid(init.v0.size - 1)
    u0 = cumulative_trapezoid(-init.rho0 / params.gamma_fluid, grid.x, initial=0.0)
    return InitialData(u0, init.v0, init.theta0)


@dataclass
class EquivalenceReport:
    N: list[int]
    discrepancy: list[float]
    ratios: list[float]
    twin_params: dict[str, float]
    warnings: list[str] = field(default_factory=list)


def thermoacoustic_equivalence(
    params: ThermoacousticParams,
    init: ThermoInitFactory,
    N_list: Sequence[int] = (128, 256),
    T: float = 1.0,
    courant: float = 1.0,
) -> EquivalenceReport:
    """max_t |v - w|_2 between the fluid system and its model-D twin (mu = 0)."""
    twin = params.string_twin()
    discrepancy, warnings = [], []
    for N in N_list:
        grid = Grid(int(N))
        data = init(grid)
        if data.v0.size != grid.N + 1:
            raise ValueError(f"initial data does not match grid N={grid.N}")
        mismatch = data.rho0[-1] - params.gamma_fluid * params.a * data.v0[-1]
        if abs(mismatch) > 10.0 * grid.h**2 * (1.0 + np.max(np.abs(data.rho0))):
            warnings.append(f"N={grid.N}: rho0(1) differs from gamma*a*v0(1) by {mismatch:.3e}")
        dt = default_dt(grid, params.c, courant)
        fluid = run_thermoacoustic(params, grid, data, dt, T)
        string = run(ModelVariant.D, twin, grid, string_twin_initial(params, data), NO_DISTURBANCE, dt, T)
        gap = fluid.fields["v"] - string.fields["w"]
        discrepancy.append(max(l2_norm(grid, row) for row in gap))
    ratios = [a / b if b > 0 else float("nan") for a, b in zip(discrepancy, discrepancy[1:])]
    return EquivalenceReport([int(n) for n in N_list], discrepancy, ratios, twin.as_dict(), warnings)


# --------------------------------------------------------------------------
# Standard matrix with refinement confirmation
# --------------------------------------------------------------------------


@dataclass
class IssVerdict:
    report: IssCheckReport
    confirmed_violation: bool
    refined: IssCheckReport | None = None


def verify_iss(
    variant: ModelVariant | str,
    params: PhysicalParams,
    cert: IssCertificate,
    N: int,
    init: InitFactory,
    disturbance: DisturbanceSpec | DisturbanceFactory,
    T: float,
    courant: float = 1.0,
) -> IssVerdict:
    """Run and check; a failure counts only if it reproduces at 2N."""
    dist = _as_factory(disturbance, DisturbanceSpec)

    def attempt(n: int) -> IssCheckReport:
        grid = Grid(n)
        traj = run(variant, params, grid, init(grid), dist(grid), default_dt(grid, params.c, courant), T)
        return check_iss(variant, params, cert, traj)

    report = attempt(N)
    if report.passed:
        return IssVerdict(report, False)
    refined = attempt(2 * N)
    return IssVerdict(report, not refined.passed, refined)


# --------------------------------------------------------------------------
# Writers
# --------------------------------------------------------------------------

SERIES_COLUMNS = ("t", "LHS", "RHS", "V", "E", "Phi", "W", "margin")


def series_table(
    times: np.ndarray,
    lhs: np.ndarray | None = None,
    rhs: np.ndarray | None = None,
    lyapunov: LyapunovSeries | None = None,
    E: np.ndarray | None = None,
) -> np.ndarray:
    """Columns of :data:`SERIES_COLUMNS`; quantities not computed are NaN."""
    n = len(times)
    blank = np.full(n, np.nan)

    def col(values):
        return blank if values is None else np.asarray(values, dtype=float)

    if lyapunov is not None and E is None:
        E = lyapunov.E
    margin = None if lhs is None or rhs is None else np.asarray(rhs) - np.asarray(lhs)
    return np.column_stack(
        [
            col(times),
            col(lhs),
            col(rhs),
            col(None if lyapunov is None else lyapunov.V),
            col(E),
            col(None if lyapunov is None else lyapunov.Phi),
            col(None if lyapunov is None else lyapunov.W),
            col(margin),
        ]
    )


def format_number(x: float) -> str:
    return f"{float(x):.17g}"


def write_series_csv(path, table: np.ndarray) -> None:
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[1] != len(SERIES_COLUMNS):
        raise ValueError(f"series table must have {len(SERIES_COLUMNS)} columns")
    lines = [",".join(SERIES_COLUMNS)]
    lines += [",".join(format_number(v) for v in row) for row in table]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_series_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if tuple(header) != SERIES_COLUMNS:
        raise ValueError(f"unexpected columns {header}")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def to_jsonable(obj):
    """Plain JSON types; numpy scalars and arrays are converted, floats kept exact."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
