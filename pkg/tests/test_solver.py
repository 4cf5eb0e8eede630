import math

import numpy as np
import pytest
from conftest import GOLDEN, bump_initial

from waveiss.certificates import certificate_for
from waveiss.discretize import Grid, first_diff, l2_norm
from waveiss.functionals import energy_E, lyapunov_V
from waveiss.harness import convergence_study, string_twin_initial
from waveiss.manufactured import StringMMS, ThermoacousticMMS
from waveiss.model import (
    NO_DISTURBANCE,
    DisturbanceSpec,
    InitialData,
    PhysicalParams,
    ProfileSpec,
    SpaceTimeSignal,
    ThermoacousticParams,
    ThermoInitialData,
    TimeSignal,
    sinusoidal_disturbance,
)
from waveiss.solver import (
    SimulationAborted,
    StringState,
    ThermoState,
    default_dt,
    run,
    run_thermoacoustic,
    step,
    step_thermoacoustic,
)

TA = ThermoacousticParams(c=1.0, gamma_fluid=1.4, b=1.0, k=1.0, lam=1.0, sigma=0.5, a=1.0)


def zero_init(grid, thermal=False):
    z = np.zeros(grid.N + 1)
    return InitialData(z, z, z if thermal else None)


@pytest.mark.parametrize("variant", ["A", "B", "C", "D"])
def test_zero_state_is_an_equilibrium(variant):
    grid = Grid(32)
    params = GOLDEN if variant != "A" else PhysicalParams()
    traj = run(variant, params, grid, zero_init(grid, variant in "CD"), T=1.0)
    assert all(np.all(v == 0.0) for v in traj.fields.values())


def test_zero_horizon_keeps_only_initial_state():
    grid = Grid(16)
    init = bump_initial("B")(grid)
    traj = run("B", GOLDEN, grid, init, T=0.0)
    assert len(traj) == 1
    assert np.array_equal(traj.final.u, init.u0)


def test_time_remainder_reported():
    grid = Grid(16)
    traj = run("B", GOLDEN, grid, bump_initial("B")(grid), dt=0.3, T=1.0)
    assert len(traj) == 4 and traj.remainder == pytest.approx(0.1)


def test_step_matches_run():
    grid = Grid(32)
    init = bump_initial("D")(grid)
    dist = sinusoidal_disturbance(1.0, 3.0, boundary=False)
    traj = run("D", GOLDEN, grid, init, dist, T=5 * grid.h)
    state = StringState.from_initial(init, "D")
    for _ in range(5):
        state = step("D", GOLDEN, grid, state, dist)
    assert np.allclose(state.u, traj.final.u, rtol=0, atol=1e-14)
    assert np.allclose(state.theta, traj.final.theta, rtol=0, atol=1e-14)


def test_plain_string_rejects_inputs():
    grid = Grid(16)
    with pytest.raises(ValueError):
        run("A", PhysicalParams(), grid, zero_init(grid), sinusoidal_disturbance(), T=0.1)


def test_kelvin_voigt_rejects_boundary_input():
    grid = Grid(16)
    with pytest.raises(ValueError):
        run("D", GOLDEN, grid, zero_init(grid, True), sinusoidal_disturbance(boundary=True), T=0.1)


def test_non_finite_input_aborts_with_partial_trajectory():
    grid = Grid(16)
    bad = DisturbanceSpec(
        f=SpaceTimeSignal("separable", g=TimeSignal("tabulated", times=(0.0, 0.1, 1.0), values=(0.0, math.inf, 0.0)))
    )
    with pytest.raises(SimulationAborted) as err:
        run("B", GOLDEN, grid, bump_initial("B")(grid), bad, T=1.0)
    traj = err.value.trajectory
    assert traj.truncated and np.all(np.isfinite(traj.fields["u"]))
    assert traj.times[-1] < 0.1


def test_plain_string_finite_time_extinction():
    grid = Grid(512)
    init = InitialData.from_profiles(grid, ProfileSpec("bump", center=0.5, width=0.3))
    params = PhysicalParams(a=1.0, c=1.0)
    traj = run("A", params, grid, init, T=2.2)
    E = [energy_E("A", params, s) for s in traj.states()]
    late = traj.times >= 2.0 / params.c + 0.1 - 1e-12
    assert max(np.array(E)[late]) <= 1e-6 * E[0]


def test_thermal_lyapunov_value_nonincreasing():
    grid = Grid(128)
    rng = np.random.default_rng(7)
    x = grid.x
    modes = np.arange(1, 6)
    coeff = rng.standard_normal((3, modes.size)) / modes**2
    u0 = np.sin(np.outer(x, modes) * np.pi / 2) @ coeff[0]
    w0 = np.sin(np.outer(x, modes) * np.pi / 2) @ coeff[1]
    th0 = np.sin(np.outer(x, modes) * np.pi) @ coeff[2]
    init = InitialData(u0, w0, th0)
    cert = certificate_for("C", GOLDEN, 1.0)
    traj = run("C", GOLDEN, grid, init, T=5.0)
    V = np.array([lyapunov_V("C", GOLDEN, s, cert).V for s in traj.states()])
    band = 10 * (grid.h**2 + traj.dt**2) * V[0]
    assert np.max(np.diff(V)) <= band


def _mms_errors(mms, variant, params, N_list, T=1.0):
    table = convergence_study(variant, params, N_list, T, mms.initial, mms.disturbance, mms.exact)
    return table


@pytest.mark.parametrize("variant", ["B", "D"])
def test_manufactured_solution_order_two(variant):
    table = _mms_errors(StringMMS.build(variant, GOLDEN), variant, GOLDEN, [32, 64, 128])
    assert table.order == pytest.approx(2.0, abs=0.1)


def test_plain_manufactured_profile_for_viscous_model():
    mms = StringMMS.build("B", GOLDEN)
    assert mms.profile.alpha == 0.0
    grid = Grid(16)
    assert np.allclose(mms.exact(0.0, grid).u, np.sin(np.pi * grid.x / 2))


def test_thermoacoustic_zero_state():
    grid = Grid(16)
    z = np.zeros(17)
    s = step_thermoacoustic(TA, grid, ThermoState(0.0, z, z, z))
    assert not np.any(s.rho) and not np.any(s.v) and not np.any(s.theta)


def test_thermoacoustic_constant_density_is_stationary():
    grid = Grid(16)
    z = np.zeros(17)
    traj = run_thermoacoustic(TA, grid, ThermoInitialData(np.full(17, 0.3), z, z), T=1.0)
    assert np.allclose(traj.fields["rho"], 0.3, rtol=0, atol=1e-14)
    assert np.allclose(traj.fields["v"], 0.0, atol=1e-14)
    assert np.allclose(traj.fields["theta"], 0.0, atol=1e-14)


def test_thermoacoustic_manufactured_order_two():
    mms = ThermoacousticMMS.build(TA)
    errors = []
    for N in (32, 64, 128):
        grid = Grid(N)
        traj = run_thermoacoustic(TA, grid, mms.initial(grid), T=1.0, disturbance=mms.disturbance(grid))
        errors.append(np.max(np.abs(traj.final.v - mms.exact(traj.final.t, grid).v)))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.1)


def test_thermoacoustic_matches_kelvin_voigt_string():
    gaps = []
    for N in (64, 128):
        grid = Grid(N)
        u0 = ProfileSpec("bump", amplitude=0.5, center=0.5, width=0.3).sample(grid)
        data = ThermoInitialData(
            -TA.gamma_fluid * first_diff(grid, u0),
            ProfileSpec("bump", amplitude=0.5, center=0.5, width=0.25).sample(grid),
            ProfileSpec("bump", amplitude=0.5, center=0.5, width=0.3).sample(grid),
        )
        dt = default_dt(grid, TA.c)
        fluid = run_thermoacoustic(TA, grid, data, dt, T=1.0)
        string = run("D", TA.string_twin(), grid, string_twin_initial(TA, data), NO_DISTURBANCE, dt, T=1.0)
        gaps.append(max(l2_norm(grid, row) for row in fluid.fields["v"] - string.fields["w"]))
    assert 3.0 <= gaps[0] / gaps[1] <= 5.0
