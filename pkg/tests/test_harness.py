import math

import numpy as np
import pytest
from conftest import GOLDEN, bump_initial

from waveiss.certificates import certificate_for
from waveiss.discretize import Grid
from waveiss.harness import (
    SERIES_COLUMNS,
    check_dissipation,
    check_iss,
    convergence_study,
    energy_series,
    fit_decay,
    lyapunov_series,
    read_series_csv,
    series_table,
    sigma_sweep,
    thermoacoustic_equivalence,
    to_jsonable,
    verify_iss,
    write_series_csv,
)
from waveiss.model import (
    InitialData,
    PhysicalParams,
    ProfileSpec,
    ThermoacousticParams,
    ThermoInitialData,
    sinusoidal_disturbance,
)
from waveiss.solver import run


def zero_init(grid, thermal):
    z = np.zeros(grid.N + 1)
    return InitialData(z, z, z if thermal else None)


def random_smooth_init(grid, thermal, seed):
    rng = np.random.default_rng(seed)
    x = grid.x
    k = np.arange(1, 7)
    scale = 1.0 / k**2
    u0 = np.sin(np.outer(x, k) * np.pi / 2) @ (rng.standard_normal(k.size) * scale)
    w0 = np.sin(np.outer(x, k) * np.pi / 2) @ (rng.standard_normal(k.size) * scale)
    th0 = np.sin(np.outer(x, k) * np.pi) @ (rng.standard_normal(k.size) * scale) if thermal else None
    return InitialData(u0, w0, th0)


@pytest.mark.parametrize("variant", ["B", "C", "D"])
def test_iss_trivial_for_zero_data(variant):
    grid = Grid(32)
    cert = certificate_for(variant, GOLDEN, 1.0)
    traj = run(variant, GOLDEN, grid, zero_init(grid, variant in "CD"), T=1.0)
    report = check_iss(variant, GOLDEN, cert, traj)
    assert report.passed and np.all(report.lhs == 0) and np.all(report.rhs == 0)


@pytest.mark.parametrize("variant", ["B", "C", "D"])
@pytest.mark.parametrize("seed", [1, 2])
def test_undisturbed_decay_estimate(variant, seed):
    grid = Grid(64)
    cert = certificate_for(variant, GOLDEN, 1.0)
    traj = run(variant, GOLDEN, grid, random_smooth_init(grid, variant in "CD", seed), T=5.0)
    report = check_iss(variant, GOLDEN, cert, traj)
    bound = cert.G * np.exp(-cert.omega * traj.times) * report.lhs[0]
    assert np.all(report.lhs <= bound + report.slack)


def test_viscous_model_under_sinusoidal_inputs():
    grid = Grid(64)
    cert = certificate_for("B", GOLDEN, 1.0)
    traj = run("B", GOLDEN, grid, bump_initial("B")(grid), sinusoidal_disturbance(1.0, 3.0), T=20.0)
    report = check_iss("B", GOLDEN, cert, traj)
    assert report.passed and report.min_margin > 0
    assert check_dissipation("B", GOLDEN, cert, traj).differential_ok


def test_verify_iss_does_not_refine_on_success():
    cert = certificate_for("C", GOLDEN, 1.0)
    verdict = verify_iss("C", GOLDEN, cert, 32, bump_initial("C"), sinusoidal_disturbance(), T=2.0)
    assert not verdict.confirmed_violation and verdict.refined is None


def test_check_iss_rejects_mismatched_inputs():
    grid = Grid(16)
    traj = run("B", GOLDEN, grid, bump_initial("B")(grid), T=0.5)
    with pytest.raises(ValueError):
        check_iss("B", GOLDEN, certificate_for("C", GOLDEN, 1.0), traj)
    other = GOLDEN.replace(mu=0.1)
    with pytest.raises(ValueError):
        check_iss("B", other, certificate_for("B", other, 1.0), traj)


def test_fit_exact_exponential():
    t = np.linspace(0, 5, 501)
    fit = fit_decay(t, np.exp(-3 * t))
    assert fit.rate == pytest.approx(3.0, abs=1e-6)
    assert not fit.finite_time and fit.residual < 1e-10


def test_fit_needs_samples():
    with pytest.raises(ValueError):
        fit_decay([0, 1, 2], [1.0, 0.5, 0.25])


@pytest.mark.parametrize("N", [64, 128])
def test_fitted_rate_is_at_least_certified(N):
    params = GOLDEN.replace(a=0.5)
    cert = certificate_for("B", params, 1.0)
    grid = Grid(N)
    traj = run("B", params, grid, bump_initial("B")(grid), T=10.0)
    V = lyapunov_series("B", params, cert, traj).V
    fit = fit_decay(traj.times, V, cert.omega)
    assert fit.conservative and fit.rate >= 2 * cert.omega


def test_plain_string_flagged_finite_time():
    # Residual dispersion keeps E near 1e-5 E(0) at N=256; N=512 reaches the threshold.
    params = PhysicalParams(a=1.0, c=1.0)
    grid = Grid(512)
    traj = run("A", params, grid, bump_initial("A")(grid), T=6.0)
    fit = fit_decay(traj.times, energy_series("A", params, traj))
    assert fit.finite_time and fit.finite_time_at < 6.0


def test_convergence_of_zero_data_is_exact():
    table = convergence_study("B", GOLDEN, [16, 32, 64], 1.0, lambda g: zero_init(g, False))
    assert table.errors == [0.0, 0.0] and math.isnan(table.order)


def test_kelvin_voigt_self_convergence():
    params = GOLDEN.replace(sigma=1.0)
    table = convergence_study("D", params, [32, 64, 128, 256], 1.0, bump_initial("D"))
    assert table.order >= 1.9


def test_convergence_input_checks():
    with pytest.raises(ValueError):
        convergence_study("B", GOLDEN, [16, 32], 1.0, bump_initial("B"))
    with pytest.raises(ValueError):
        convergence_study("B", GOLDEN, [16, 24, 40], 1.0, bump_initial("B"))


def test_sigma_sweep_trends():
    sweep = sigma_sweep(GOLDEN, [1.0, 0.5])
    assert sweep.gamma_increasing
    sweep = sigma_sweep(GOLDEN, [1.0, 0.1, 0.01])
    assert sweep.omega_decreasing and sweep.monotone


def test_sigma_sweep_single_row_makes_no_claim():
    sweep = sigma_sweep(GOLDEN, [0.3])
    assert len(sweep.rows) == 1 and sweep.monotone is None and sweep.gamma_increasing is None


def test_sigma_sweep_validates_list():
    with pytest.raises(ValueError):
        sigma_sweep(GOLDEN, [0.1, 1.0])
    with pytest.raises(ValueError):
        sigma_sweep(GOLDEN, [1.0, 0.0])


TA = ThermoacousticParams(c=1.0, gamma_fluid=1.4, b=1.0, k=1.0, lam=1.0, sigma=0.5, a=1.0)


def test_equivalence_of_zero_data():
    def init(grid):
        z = np.zeros(grid.N + 1)
        return ThermoInitialData(z, z, z)

    report = thermoacoustic_equivalence(TA, init, [32, 64], T=0.5)
    assert report.discrepancy == [0.0, 0.0]
    assert report.twin_params["mu"] == 0.0


def test_equivalence_refinement_ratio():
    def init(grid):
        v0 = ProfileSpec("bump", amplitude=0.5, center=0.5, width=0.25).sample(grid)
        th0 = ProfileSpec("bump", amplitude=0.5, center=0.5, width=0.3).sample(grid)
        return ThermoInitialData(np.zeros(grid.N + 1), v0, th0)

    report = thermoacoustic_equivalence(TA, init, [64, 128], T=1.0)
    assert 3.0 <= report.ratios[0] <= 5.0


def test_series_csv_round_trip(tmp_path):
    grid = Grid(16)
    cert = certificate_for("D", GOLDEN, 1.0)
    traj = run("D", GOLDEN, grid, bump_initial("D")(grid), T=0.5)
    iss = check_iss("D", GOLDEN, cert, traj)
    table = series_table(traj.times, iss.lhs, iss.rhs, lyapunov_series("D", GOLDEN, cert, traj))
    path = tmp_path / "series.csv"
    write_series_csv(path, table)
    assert path.read_text().splitlines()[0] == ",".join(SERIES_COLUMNS)
    back = read_series_csv(path)
    assert np.array_equal(back, table)


def test_series_blank_columns_are_nan():
    table = series_table(np.arange(3.0), E=np.ones(3))
    assert np.all(np.isnan(table[:, 3])) and np.all(table[:, 4] == 1.0)


def test_jsonable():
    out = to_jsonable({"a": np.float64(1.5), "b": np.array([1, 2]), "c": float("nan"), "d": np.bool_(True)})
    assert out == {"a": 1.5, "b": [1, 2], "c": None, "d": True}
