"""Sandwich and intermediate inequalities on random discrete states (N = 256)."""

import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from waveiss.certificates import thm1_certificate, thm2_certificate, thm3_certificate
from waveiss.discretize import Grid, forward_gradient_energy, trapz
from waveiss.functionals import (
    lyapunov_V,
    phi,
    riemann_weighted_sum,
    sandwich_norm,
    state_norms,
)
from waveiss.model import PhysicalParams
from waveiss.solver import StringState

GRID = Grid(256)
SLACK = 10.0 * GRID.h**2
EXAMPLES = settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])

positive = st.floats(min_value=0.05, max_value=5.0, allow_nan=False)
weights = st.floats(min_value=0.05, max_value=4.0, allow_nan=False)


def random_field(rng, pinned_right=False):
    """Smooth modes plus optional white noise and checkerboard, zero at x = 0."""
    x = GRID.x
    k = np.arange(1, 13)
    field = np.sin(np.outer(x, k) * (np.pi if pinned_right else np.pi / 2)) @ (
        rng.standard_normal(k.size) / k ** rng.uniform(0.0, 2.0)
    )
    kind = rng.integers(0, 3)
    if kind == 1:
        field = field + rng.uniform(0, 1) * rng.standard_normal(x.size)
    elif kind == 2:
        field = field + rng.uniform(0, 1) * (-1.0) ** np.arange(x.size)
    field *= 10.0 ** rng.uniform(-3, 3)
    field[0] = 0.0
    if pinned_right:
        field[-1] = 0.0
    return field


def random_state(seed, thermal=False):
    rng = np.random.default_rng(seed)
    theta = random_field(rng, True) if thermal else None
    return StringState(0.0, random_field(rng), random_field(rng), theta)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@EXAMPLES
@given(seed=seeds, r=weights, c=positive)
def test_riemann_functional_bounds(seed, r, c):
    params = PhysicalParams(a=1.0, c=c)
    s = random_state(seed)
    n = state_norms("B", s)
    base = c**2 * n.u_x**2 + n.w**2
    value = phi("B", params, s, r)
    assert math.exp(-r) * base <= value + SLACK * base
    assert value <= math.exp(r) * base + SLACK * base


@EXAMPLES
@given(seed=seeds, r=weights, c=positive)
def test_velocity_bounded_by_riemann_sum(seed, r, c):
    params = PhysicalParams(a=1.0, c=c)
    s = random_state(seed)
    w2 = trapz(GRID, s.w**2)
    rhs = math.cosh(r) / 2.0 * riemann_weighted_sum(params, s, r)
    assert w2 <= rhs + SLACK * w2


@EXAMPLES
@given(seed=seeds, r=weights, a=positive, c=positive, mu=st.floats(0.0, 3.0))
def test_first_theorem_sandwich(seed, r, a, c, mu):
    params = PhysicalParams(a=a, c=c, mu=mu)
    cert = thm1_certificate(params, r)
    s = random_state(seed)
    S = sandwich_norm("B", params, s)
    V = lyapunov_V("B", params, s, cert).V
    assert (cert.M / 2 + math.exp(-r)) * S <= V + SLACK * S
    assert V <= (cert.M / 2 + math.exp(r)) * S + SLACK * S


@EXAMPLES
@given(seed=seeds, r=weights, a=positive, c=positive, mu=st.floats(0.0, 3.0), b=positive, k=positive, lam=positive)
def test_second_theorem_sandwich(seed, r, a, c, mu, b, k, lam):
    params = PhysicalParams(a=a, c=c, mu=mu, b=b, k=k, lam=lam)
    cert = thm2_certificate(params, r)
    s = random_state(seed, thermal=True)
    S = sandwich_norm("C", params, s)
    V = lyapunov_V("C", params, s, cert).V
    assert cert.sandwich_lower * S <= V + SLACK * cert.sandwich_lower * S
    assert V <= cert.sandwich_upper * S * (1 + SLACK)


@EXAMPLES
@given(
    seed=seeds, r=weights, a=positive, c=positive, mu=st.floats(0.0, 3.0),
    b=positive, k=positive, lam=positive, sigma=st.floats(0.01, 3.0),
)
def test_third_theorem_sandwich(seed, r, a, c, mu, b, k, lam, sigma):
    params = PhysicalParams(a=a, c=c, mu=mu, b=b, k=k, lam=lam, sigma=sigma)
    cert = thm3_certificate(params, r)
    assert 0 < cert.C1 <= cert.C2
    s = random_state(seed, thermal=True)
    S = sandwich_norm("D", params, s)
    V = lyapunov_V("D", params, s, cert).V
    assert cert.C1 * S <= V + SLACK * cert.C1 * S
    assert V <= cert.C2 * S * (1 + SLACK)


@EXAMPLES
@given(seed=seeds)
def test_discrete_wirtinger(seed):
    rng = np.random.default_rng(seed)
    theta = random_field(rng, pinned_right=True)
    norm2 = trapz(GRID, theta**2)
    assert forward_gradient_energy(GRID, theta) >= math.pi**2 * norm2 - SLACK * norm2


@settings(max_examples=300, deadline=None)
@given(r=weights, a=positive, c=positive, mu=st.floats(0.0, 3.0), b=positive, k=positive, lam=positive,
       sigma=st.floats(0.01, 3.0))
def test_certificate_invariants(r, a, c, mu, b, k, lam, sigma):
    params = PhysicalParams(a=a, c=c, mu=mu, b=b, k=k, lam=lam, sigma=sigma)
    for build in (thm1_certificate, thm2_certificate, thm3_certificate):
        cert = build(params, r)
        assert cert.omega > 0 and cert.G >= 1.0
        assert all(g >= 0 for g in cert.gains()) and cert.gains()[0] > 0
    assert thm2_certificate(params, r).omega <= k * math.pi**2 / 2
