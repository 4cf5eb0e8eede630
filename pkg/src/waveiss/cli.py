"""Command-line front end: parse a JSON run configuration, run one experiment, write artifacts.

Every artifact except ``manifest.json`` is a pure function of the canonical
configuration, so re-running an identical config reproduces identical bytes.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from waveiss import certificates, harness
from waveiss.discretize import Grid, first_diff
from waveiss.manufactured import StringMMS
from waveiss.model import (
    DisturbanceSpec,
    InitialData,
    ModelVariant,
    PhysicalParams,
    ProfileSpec,
    SpaceTimeSignal,
    ThermoacousticParams,
    ThermoInitialData,
    TimeSignal,
    validate,
    validate_thermoacoustic,
)
from waveiss.solver import SimulationAborted, default_dt, run

EXPERIMENTS = ("simulate", "certify", "check-iss", "converge", "sweep-sigma", "thermoacoustic-equiv")
PROFILE_ALIASES = {"gaussian-pulse": "gaussian"}

# Canonical defaults; the schema is exactly this key tree.
DEFAULTS: dict[str, Any] = {
    "experiment": "simulate",
    "variant": "A",
    "params": PhysicalParams().as_dict(),
    "thermoacoustic": ThermoacousticParams().as_dict(),
    "grid": {"N": 256, "courant": 1.0, "dt": None},
    "T": 10.0,
    "initial": {
        "u0": {"kind": "sine", "amplitude": 1.0, "wavenumber": 0.5},
        "w0": {"kind": "zero"},
        "theta0": {"kind": "zero"},
    },
    "disturbance": {"f": {"kind": "zero"}, "d": {"kind": "zero"}},
    "certificate": {"r": 1.0, "optimize": False, "r_range": [0.01, 5.0], "objective": "maximize_omega"},
    "converge": {"N_list": [32, 64, 128, 256], "reference": "self", "expected_order": None, "order_tolerance": 0.1},
    "sweep": {"sigma_list": [1.0, 0.3, 0.1, 0.03, 0.01]},
    "equivalence": {"N_list": [128, 256], "ratio_band": [3.0, 5.0]},
    "out": "results",
}

PROFILE_KEYS = {"kind", "amplitude", "wavenumber", "center", "width", "coefficients", "values", "file"}
SIGNAL_KEYS = {"kind", "amplitude", "frequency", "phase", "rate", "window", "times", "values"}
FORCE_KEYS = SIGNAL_KEYS | {"profile"}


class ConfigError(ValueError):
    """Every problem found in a configuration, not just the first."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    variant: ModelVariant
    params: PhysicalParams
    thermoacoustic: ThermoacousticParams
    N: int
    courant: float
    dt: float | None
    T: float
    initial: dict[str, dict]
    disturbance: dict[str, dict]
    certificate: dict[str, Any]
    converge: dict[str, Any]
    sweep: dict[str, Any]
    equivalence: dict[str, Any]
    out: str
    base_dir: Path = field(default=Path("."), compare=False)

    # -- canonical form ---------------------------------------------------
    def canonical(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment,
            "variant": self.variant.value,
            "params": self.params.as_dict(),
            "thermoacoustic": self.thermoacoustic.as_dict(),
            "grid": {"N": self.N, "courant": self.courant, "dt": self.dt},
            "T": self.T,
            "initial": copy.deepcopy(self.initial),
            "disturbance": copy.deepcopy(self.disturbance),
            "certificate": copy.deepcopy(self.certificate),
            "converge": copy.deepcopy(self.converge),
            "sweep": copy.deepcopy(self.sweep),
            "equivalence": copy.deepcopy(self.equivalence),
            "out": self.out,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical(), indent=2, sort_keys=True)

    # -- derived objects ---------------------------------------------------
    @property
    def time_step(self) -> float:
        grid = Grid(self.N)
        return self.dt if self.dt is not None else default_dt(grid, self.params.c, self.courant)

    def profile(self, name: str) -> "_FileProfile":
        spec = dict(self.initial[name])
        path = spec.pop("file", None)
        if path is not None:
            spec["kind"] = "tabulated"
        for key in ("coefficients", "values"):
            if key in spec:
                spec[key] = tuple(spec[key])
        return _FileProfile(ProfileSpec(**spec), None if path is None else self.base_dir / path)

    def initial_data(self, grid: Grid) -> InitialData:
        theta = self.profile("theta0").sample(grid) if self.variant.thermal else None
        return InitialData(self.profile("u0").sample(grid), self.profile("w0").sample(grid), theta)

    def thermo_initial_data(self, grid: Grid) -> ThermoInitialData:
        """rho0 = -gamma * u0_x so that the string twin starts from the same state."""
        u0 = self.profile("u0").sample(grid)
        rho0 = -self.thermoacoustic.gamma_fluid * first_diff(grid, u0)
        return ThermoInitialData(rho0, self.profile("w0").sample(grid), self.profile("theta0").sample(grid))

    def disturbance_spec(self) -> DisturbanceSpec:
        f = dict(self.disturbance["f"])
        d = dict(self.disturbance["d"])
        profile = f.pop("profile", "uniform")
        f_signal = (
            SpaceTimeSignal()
            if f["kind"] == "zero"
            else SpaceTimeSignal("separable", g=_time_signal(f), profile=profile)
        )
        return DisturbanceSpec(f=f_signal, d=_time_signal(d))


@dataclass(frozen=True)
class _FileProfile:
    """A profile whose tabulated values may come from a text file of x,value pairs."""

    spec: ProfileSpec
    path: Path | None

    def sample(self, grid: Grid) -> np.ndarray:
        if self.path is None:
            return self.spec.sample(grid)
        table = np.loadtxt(self.path, delimiter=",", ndmin=2)
        if table.shape[1] == 2:
            return np.interp(grid.x, table[:, 0], table[:, 1])
        values = table.ravel()
        if values.size != grid.N + 1:
            raise ValueError(f"{self.path}: {values.size} values, grid needs {grid.N + 1}")
        return values


def _time_signal(spec: dict) -> TimeSignal:
    spec = dict(spec)
    for key in ("times", "values"):
        if key in spec:
            spec[key] = tuple(spec[key])
    if spec.get("window") is not None:
        spec["window"] = tuple(spec["window"])
    return TimeSignal(**spec)


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _merge(base: dict, user: dict, path: str, errors: list[str]) -> dict:
    """Overlay ``user`` on ``base``; keys absent from ``base`` are errors."""
    out = copy.deepcopy(base)
    for key, value in user.items():
        where = f"{path}{key}"
        if key not in base:
            errors.append(f"unknown key '{where}'")
            continue
        if isinstance(base[key], dict) and key not in ("initial", "disturbance"):
            if not isinstance(value, dict):
                errors.append(f"'{where}' must be a mapping")
                continue
            out[key] = _merge(base[key], value, where + ".", errors)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _check_keys(spec: Any, allowed: set[str], where: str, errors: list[str]) -> bool:
    if not isinstance(spec, dict):
        errors.append(f"'{where}' must be a mapping")
        return False
    for key in spec:
        if key not in allowed:
            errors.append(f"unknown key '{where}.{key}'")
    if "kind" not in spec:
        errors.append(f"'{where}.kind' is required")
        return False
    return True


def _profile_errors(name: str, spec: dict, base_dir: Path, errors: list[str]) -> dict:
    where = f"initial.{name}"
    if not _check_keys(spec, PROFILE_KEYS, where, errors):
        return spec
    spec = dict(spec)
    spec["kind"] = PROFILE_ALIASES.get(spec["kind"], spec["kind"])
    if "file" in spec:
        spec["kind"] = "tabulated"
        if not (base_dir / str(spec["file"])).is_file():
            errors.append(f"'{where}.file' does not exist: {spec['file']}")
    try:
        ProfileSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in spec.items() if k != "file"})
    except (TypeError, ValueError) as exc:
        errors.append(f"'{where}': {exc}")
    return spec


def _signal_errors(name: str, spec: dict, allowed: set[str], errors: list[str]) -> dict:
    where = f"disturbance.{name}"
    if not _check_keys(spec, allowed, where, errors):
        return spec
    try:
        _time_signal({k: v for k, v in spec.items() if k != "profile"})
        if "profile" in spec:
            SpaceTimeSignal("separable", profile=spec["profile"])
    except (TypeError, ValueError) as exc:
        errors.append(f"'{where}': {exc}")
    return spec


def _positive_list(value: Any, where: str, errors: list[str], integer: bool = False) -> None:
    ok = isinstance(value, list) and value and all(_is_number(v) and v > 0 for v in value)
    if ok and integer:
        ok = all(isinstance(v, int) for v in value)
    if not ok:
        errors.append(f"'{where}' must be a non-empty list of positive {'integers' if integer else 'numbers'}")


def build_config(raw: dict[str, Any], base_dir: Path | str = ".") -> RunConfig:
    """Validate a raw mapping against the schema; raise :class:`ConfigError` with all errors."""
    base_dir = Path(base_dir)
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["configuration must be a JSON object"])
    cfg = _merge(DEFAULTS, raw, "", errors)

    if cfg["experiment"] not in EXPERIMENTS:
        errors.append(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    variant = None
    try:
        variant = ModelVariant(cfg["variant"])
    except ValueError:
        errors.append(f"unknown variant {cfg['variant']!r}")

    for section in ("params", "thermoacoustic"):
        for key, value in cfg[section].items():
            if not _is_number(value):
                errors.append(f"'{section}.{key}' must be a finite number")
    params = ta = None
    if not any(e.startswith("'params.") for e in errors):
        params = PhysicalParams(**{k: float(v) for k, v in cfg["params"].items()})
        if variant is not None and variant is not ModelVariant.THERMOACOUSTIC:
            errors.extend(validate(params, variant).violations)
    if not any(e.startswith("'thermoacoustic.") for e in errors):
        ta = ThermoacousticParams(**{k: float(v) for k, v in cfg["thermoacoustic"].items()})
        if cfg["experiment"] == "thermoacoustic-equiv":
            errors.extend(validate_thermoacoustic(ta).violations)

    grid = cfg["grid"]
    if not (isinstance(grid["N"], int) and not isinstance(grid["N"], bool) and grid["N"] >= 8):
        errors.append("'grid.N' must be an integer >= 8")
    if not (_is_number(grid["courant"]) and grid["courant"] > 0):
        errors.append("'grid.courant' must be > 0")
    if grid["dt"] is not None and not (_is_number(grid["dt"]) and grid["dt"] > 0):
        errors.append("'grid.dt' must be > 0 or null")
    if not (_is_number(cfg["T"]) and cfg["T"] > 0):
        errors.append("'T' must be > 0")

    initial = cfg["initial"]
    if not isinstance(initial, dict):
        errors.append("'initial' must be a mapping")
        initial = copy.deepcopy(DEFAULTS["initial"])
    for key in initial:
        if key not in DEFAULTS["initial"]:
            errors.append(f"unknown key 'initial.{key}'")
    initial = {
        name: _profile_errors(name, initial.get(name, DEFAULTS["initial"][name]), base_dir, errors)
        for name in DEFAULTS["initial"]
    }

    dist = cfg["disturbance"]
    if not isinstance(dist, dict):
        errors.append("'disturbance' must be a mapping")
        dist = copy.deepcopy(DEFAULTS["disturbance"])
    for key in dist:
        if key not in DEFAULTS["disturbance"]:
            errors.append(f"unknown key 'disturbance.{key}'")
    f_spec = dist.get("f", {"kind": "zero"})
    d_spec = dist.get("d", {"kind": "zero"})
    disturbance = {
        "f": _signal_errors("f", f_spec, FORCE_KEYS, errors),
        "d": _signal_errors("d", d_spec, SIGNAL_KEYS, errors),
    }
    if isinstance(f_spec, dict) and f_spec.get("kind") == "zero" and "profile" in f_spec:
        errors.append("'disturbance.f.profile' is meaningless for kind zero")

    cert = cfg["certificate"]
    if not (_is_number(cert["r"]) and cert["r"] > 0):
        errors.append("'certificate.r' must be > 0")
    if not isinstance(cert["optimize"], bool):
        errors.append("'certificate.optimize' must be true or false")
    rr = cert["r_range"]
    if not (isinstance(rr, list) and len(rr) == 2 and all(_is_number(v) for v in rr) and 0 < rr[0] <= rr[1]):
        errors.append("'certificate.r_range' must be [lo, hi] with 0 < lo <= hi")
    if cert["objective"] not in certificates.OBJECTIVES:
        errors.append(f"'certificate.objective' must be one of {', '.join(certificates.OBJECTIVES)}")

    conv = cfg["converge"]
    _positive_list(conv["N_list"], "converge.N_list", errors, integer=True)
    if conv["reference"] not in ("self", "manufactured"):
        errors.append("'converge.reference' must be 'self' or 'manufactured'")
    if conv["expected_order"] is not None and not _is_number(conv["expected_order"]):
        errors.append("'converge.expected_order' must be a number or null")
    if not (_is_number(conv["order_tolerance"]) and conv["order_tolerance"] >= 0):
        errors.append("'converge.order_tolerance' must be >= 0")
    _positive_list(cfg["sweep"]["sigma_list"], "sweep.sigma_list", errors)
    eq = cfg["equivalence"]
    _positive_list(eq["N_list"], "equivalence.N_list", errors, integer=True)
    band = eq["ratio_band"]
    if band is not None and not (isinstance(band, list) and len(band) == 2 and all(_is_number(v) for v in band)):
        errors.append("'equivalence.ratio_band' must be [lo, hi] or null")
    if not isinstance(cfg["out"], str) or not cfg["out"]:
        errors.append("'out' must be a non-empty path")

    if variant is not None and cfg["experiment"] in ("certify", "check-iss", "sweep-sigma"):
        if variant.theorem is None:
            errors.append(f"experiment {cfg['experiment']} needs variant B, C or D")
    if cfg["experiment"] == "sweep-sigma" and variant is not None and variant is not ModelVariant.D:
        errors.append("sweep-sigma needs variant D")

    if errors:
        raise ConfigError(errors)

    def num(x):
        return float(x)

    config = RunConfig(
        experiment=cfg["experiment"],
        variant=variant,
        params=params,
        thermoacoustic=ta,
        N=int(grid["N"]),
        courant=num(grid["courant"]),
        dt=None if grid["dt"] is None else num(grid["dt"]),
        T=num(cfg["T"]),
        initial=_normalize(initial),
        disturbance=_normalize(disturbance),
        certificate={
            "r": num(cert["r"]),
            "optimize": cert["optimize"],
            "r_range": [num(v) for v in rr],
            "objective": cert["objective"],
        },
        converge={
            "N_list": [int(v) for v in conv["N_list"]],
            "reference": conv["reference"],
            "expected_order": None if conv["expected_order"] is None else num(conv["expected_order"]),
            "order_tolerance": num(conv["order_tolerance"]),
        },
        sweep={"sigma_list": [num(v) for v in cfg["sweep"]["sigma_list"]]},
        equivalence={
            "N_list": [int(v) for v in eq["N_list"]],
            "ratio_band": None if band is None else [num(v) for v in band],
        },
        out=cfg["out"],
        base_dir=base_dir,
    )
    try:
        grid_0 = Grid(config.N)
        if config.experiment == "thermoacoustic-equiv":
            config.thermo_initial_data(grid_0)
        else:
            config.initial_data(grid_0)
    except (OSError, ValueError) as exc:
        raise ConfigError([f"initial data: {exc}"]) from exc
    return config


def _normalize(tree: Any) -> Any:
    """Ints become floats except in integer-valued fields, so round trips are exact."""
    if isinstance(tree, dict):
        return {k: _normalize(v) for k, v in tree.items()}
    if isinstance(tree, list):
        return [_normalize(v) for v in tree]
    if _is_number(tree):
        return float(tree)
    return tree


def _parse_override(text: str) -> tuple[list[str], Any]:
    if "=" not in text:
        raise ConfigError([f"override {text!r} must look like key=value"])
    key, value = text.split("=", 1)
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return key.strip().split("."), parsed


def apply_overrides(raw: dict[str, Any], overrides: Sequence[str]) -> dict[str, Any]:
    raw = copy.deepcopy(raw)
    for text in overrides:
        path, value = _parse_override(text)
        node = raw
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError([f"override {text!r} descends into a non-mapping"])
        node[path[-1]] = value
    return raw


def parse_config(
    path: str | Path | None = None, overrides: Sequence[str] = (), experiment: str | None = None, out: str | None = None
) -> RunConfig:
    raw: dict[str, Any] = {}
    base_dir = Path(".")
    if path is not None:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})"]) from exc
        base_dir = path.parent
    raw = apply_overrides(raw, overrides)
    if experiment is not None:
        raw["experiment"] = experiment
    if out is not None:
        raw["out"] = out
    return build_config(raw, base_dir)


# --------------------------------------------------------------------------
# Execution
# --------------------------------------------------------------------------


@dataclass
class ExecutionResult:
    status: int
    out_dir: Path
    files: list[str]
    failed_checks: list[str]
    truncated: bool = False


def _certificate(cfg: RunConfig):
    c = cfg.certificate
    theorem = cfg.variant.theorem
    if c["optimize"]:
        search = certificates.optimize_r(theorem, cfg.params, tuple(c["r_range"]), c["objective"])
        info = {
            "r_star": search.r_star,
            "objective": search.objective,
            "value": search.value,
            "at_lower_bound": search.at_lower_bound,
            "at_upper_bound": search.at_upper_bound,
        }
        return search.certificate, info
    return certificates.certificate(theorem, cfg.params, c["r"]), None


def _simulate(cfg: RunConfig, out: Path, files: list[str], failed: list[str]) -> bool:
    grid = Grid(cfg.N)
    truncated = False
    try:
        traj = run(cfg.variant, cfg.params, grid, cfg.initial_data(grid), cfg.disturbance_spec(), cfg.time_step, cfg.T)
    except SimulationAborted as exc:
        traj, truncated = exc.trajectory, True
        failed.append(f"simulate: non-finite state after t={traj.times[-1]:.17g}")
    E = harness.energy_series(cfg.variant, cfg.params, traj)
    lyap = None
    if cfg.variant.theorem is not None:
        cert, _ = _certificate(cfg)
        lyap = harness.lyapunov_series(cfg.variant, cfg.params, cert, traj)
    harness.write_series_csv(out / "series.csv", harness.series_table(traj.times, lyapunov=lyap, E=E))
    report = {
        "steps": len(traj) - 1,
        "dt": traj.dt,
        "t_final": traj.times[-1],
        "time_remainder": traj.remainder,
        "truncated": truncated,
        "E_initial": E[0],
        "E_final": E[-1],
    }
    if E[0] > 0 and len(E) >= 2 * harness.MIN_FIT_SAMPLES:
        try:
            fit = harness.fit_decay(traj.times, E)
            report["energy_decay"] = {
                "rate": fit.rate,
                "residual": fit.residual,
                "finite_time": fit.finite_time,
                "finite_time_at": fit.finite_time_at,
            }
        except ValueError as exc:
            report["energy_decay"] = {"error": str(exc)}
    harness.write_json(out / "report.json", report)
    files += ["series.csv", "report.json"]
    return truncated


def _certify(cfg: RunConfig, out: Path, files: list[str], failed: list[str]) -> None:
    cert, search = _certificate(cfg)
    payload = json.loads(cert.to_json())
    if search is not None:
        payload["r_search"] = search
    harness.write_json(out / "certificate.json", payload)
    files.append("certificate.json")


def _check_iss(cfg: RunConfig, out: Path, files: list[str], failed: list[str]) -> bool:
    cert, _ = _certificate(cfg)
    grid = Grid(cfg.N)
    dist = cfg.disturbance_spec()
    try:
        traj = run(cfg.variant, cfg.params, grid, cfg.initial_data(grid), dist, cfg.time_step, cfg.T)
    except SimulationAborted as exc:
        failed.append(f"check-iss: non-finite state after t={exc.trajectory.times[-1]:.17g}")
        return True
    iss = harness.check_iss(cfg.variant, cfg.params, cert, traj)
    lyap = harness.lyapunov_series(cfg.variant, cfg.params, cert, traj)
    diss = harness.check_dissipation(cfg.variant, cfg.params, cert, traj, lyap)
    harness.write_series_csv(out / "series.csv", harness.series_table(traj.times, iss.lhs, iss.rhs, lyap))
    checks = {"iss_estimate": iss.passed, "lyapunov_dissipation": diss.differential_ok}
    if dist.is_zero:
        checks["exponential_decay"] = diss.exponential_ok
    report = {
        "iss": iss.summary(),
        "dissipation": {
            "max_excess": float(np.max(diss.excess, initial=-np.inf)),
            "tolerance": diss.tolerance,
        },
        "checks": checks,
    }
    if dist.is_zero:
        report["dissipation"]["min_exponential_margin"] = float(np.min(diss.exponential_margin))
        report["dissipation"]["exponential_tolerance"] = diss.exponential_tolerance
    harness.write_json(out / "certificate.json", json.loads(cert.to_json()))
    harness.write_json(out / "report.json", report)
    files += ["certificate.json", "series.csv", "report.json"]
    failed += [f"check-iss: {name}" for name, ok in checks.items() if not ok]
    return False


def _converge(cfg: RunConfig, out: Path, files: list[str], failed: list[str]) -> None:
    conv = cfg.converge
    if conv["reference"] == "manufactured":
        mms = StringMMS.build(cfg.variant, cfg.params)
        table = harness.convergence_study(
            cfg.variant, cfg.params, conv["N_list"], cfg.T, mms.initial, mms.disturbance, mms.exact, cfg.courant
        )
    else:
        table = harness.convergence_study(
            cfg.variant, cfg.params, conv["N_list"], cfg.T, cfg.initial_data, cfg.disturbance_spec(), None, cfg.courant
        )
    report = table.as_dict()
    expected = conv["expected_order"]
    if expected is not None:
        ok = math.isfinite(table.order) and abs(table.order - expected) <= conv["order_tolerance"]
        report["order_check"] = {"expected": expected, "tolerance": conv["order_tolerance"], "passed": ok}
        if not ok:
            failed.append(f"converge: order {table.order:.4f} outside {expected} +/- {conv['order_tolerance']}")
    harness.write_json(out / "convergence.json", report)
    files.append("convergence.json")


def _sweep(cfg: RunConfig, out: Path, files: list[str], failed: list[str]) -> None:
    sweep = harness.sigma_sweep(cfg.params, cfg.sweep["sigma_list"], cfg.certificate["r"])
    report = {
        "rows": sweep.rows,
        "gamma_increasing": sweep.gamma_increasing,
        "C1_decreasing": sweep.C1_decreasing,
        "omega_decreasing": sweep.omega_decreasing,
    }
    harness.write_json(out / "sweep.json", report)
    files.append("sweep.json")
    if sweep.monotone is False:
        failed.append("sweep-sigma: gamma or C1 not monotone as sigma decreases")


def _equivalence(cfg: RunConfig, out: Path, files: list[str], failed: list[str]) -> None:
    rep = harness.thermoacoustic_equivalence(
        cfg.thermoacoustic, cfg.thermo_initial_data, cfg.equivalence["N_list"], cfg.T, cfg.courant
    )
    band = cfg.equivalence["ratio_band"]
    report = {
        "N": rep.N,
        "discrepancy": rep.discrepancy,
        "ratios": rep.ratios,
        "twin_params": rep.twin_params,
        "warnings": rep.warnings,
    }
    if band is not None:
        ok = bool(rep.ratios) and all(band[0] <= q <= band[1] for q in rep.ratios)
        report["ratio_check"] = {"band": band, "passed": ok}
        if not ok:
            failed.append(f"thermoacoustic-equiv: ratios {rep.ratios} outside {band}")
    harness.write_json(out / "equivalence.json", report)
    files.append("equivalence.json")


_DISPATCH = {
    "simulate": _simulate,
    "certify": _certify,
    "check-iss": _check_iss,
    "converge": _converge,
    "sweep-sigma": _sweep,
    "thermoacoustic-equiv": _equivalence,
}


def sha256_of(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def execute(cfg: RunConfig, out_dir: str | Path | None = None) -> ExecutionResult:
    """Run the configured experiment, write artifacts and ``manifest.json``."""
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []
    failed: list[str] = []
    truncated = bool(_DISPATCH[cfg.experiment](cfg, out, files, failed))
    status = 1 if failed else 0
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.canonical(),
        "files": [{"name": name, "sha256": sha256_of(out / name), "bytes": (out / name).stat().st_size} for name in files],
        "exit_status": status,
        "failed_checks": failed,
        "truncated": truncated,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    harness.write_json(out / "manifest.json", manifest)
    return ExecutionResult(status, out, files, failed, truncated)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="waveiss", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--experiment", choices=EXPERIMENTS, help="override the configured experiment")
    parser.add_argument("--out", help="output directory")
    parser.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="dotted key with a JSON value, e.g. params.sigma=0.1 (repeatable)",
    )
    parser.add_argument("--print-config", action="store_true", help="print the canonical configuration and exit")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, args.override, args.experiment, args.out)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    if args.print_config:
        print(cfg.canonical_json())
        return 0
    try:
        result = execute(cfg)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for check in result.failed_checks:
        print(f"FAILED {check}", file=sys.stderr)
    print(f"wrote {len(result.files) + 1} files to {result.out_dir}")
    return result.status


if __name__ == "__main__":
    sys.exit(main())
