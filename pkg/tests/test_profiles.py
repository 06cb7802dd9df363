import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from reebtorus.errors import InfeasibleRamp
from reebtorus.profiles import build_G, build_rho, smooth_step


def test_smooth_step_basic():
    x = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    v, d = smooth_step(x)
    assert np.array_equal(v[[0, 1]], [0.0, 0.0]) and np.array_equal(v[[3, 4]], [1.0, 1.0])
    assert v[2] == 0.5
    assert np.all(d[[0, 1, 3, 4]] == 0.0)


@given(st.floats(-0.5, 1.5))
def test_smooth_step_symmetry(x):
    a, da = smooth_step(x)
    b, db = smooth_step(1.0 - x)
    assert abs(a + b - 1.0) <= 1e-15
    assert abs(da - db) <= 1e-12 * max(1.0, abs(da))


def test_smooth_step_derivative():
    x = np.linspace(0.02, 0.98, 97)
    h = 1e-6
    fd = (smooth_step(x + h)[0] - smooth_step(x - h)[0]) / (2 * h)
    assert np.allclose(smooth_step(x)[1], fd, atol=1e-8)


def test_rho_examples():
    rho = build_rho()
    assert rho(1.0 / 3.0) == 0.0
    assert rho(2.0 / 3.0) == 1.0
    assert rho(0.5) == 0.5
    assert rho.derivative(0.2) == 0.0 and rho.derivative(0.9) == 0.0
    r = np.sort(np.random.default_rng(0).uniform(-1, 2, 1000))
    v = rho(r)
    assert np.all(np.diff(v) >= 0)
    assert np.all(v[r <= 1 / 3] == 0.0) and np.all(v[r >= 2 / 3] == 1.0)
    inside = (r > 0.34) & (r < 0.66)
    assert np.all((v[inside] > 0) & (v[inside] < 1))


@pytest.fixture(scope="module")
def G():
    return build_G(1.5, 0.7)


def test_ramp_start_closed_form(G):
    # the slope ramp is symmetric about its midpoint, so its integral is (u_end - a)/2; setting that
    # equal to u_end gives a = -u_end
    u_end = 0.5 * min(math.log(1.5), 0.7 - math.log(1.5))
    assert math.isclose(G.u_end, u_end, rel_tol=1e-15)
    assert abs(G.a + u_end) <= 1e-12


def test_G_anchor_values(G):
    assert G(1.5) == pytest.approx(1.5, abs=1e-15)
    assert G(0.70) == 1.0
    assert G(1.5 * math.exp(-0.7)) == 1.0
    assert 1.0 <= G(1.0) <= 1.5
    assert G.one_until >= 1.5 * math.exp(-0.7)
    assert G.identity_from < 1.5


def test_G_table_against_quadrature(G):
    us = np.linspace(G.a, G.u_end, 57)

    def slope(u):
        return float(smooth_step((u - G.a) / (G.u_end - G.a))[0])

    oracle = np.array([G.u_end - quad(slope, u, G.u_end, epsabs=1e-14, epsrel=1e-12, limit=200)[0] for u in us])
    g, dg = G.log_profile(us)
    assert np.max(np.abs(g - np.maximum(oracle, 0.0))) <= 1e-10
    assert np.allclose(dg, [slope(u) for u in us], atol=1e-15)


def test_G_invariants(G):
    t = np.logspace(-3, 3, 10_000)
    val, der, tlog = G.both(t)
    assert np.all(tlog <= 1.0 + 1e-12)
    assert np.all(np.diff(val) >= 0.0)
    assert np.all(der >= 0.0)
    big = t >= G.identity_from
    assert np.allclose(val[big], t[big], rtol=1e-14)
    assert np.all(val[t <= 1.5 * math.exp(-0.7)] == 1.0)


def test_G_derivative_matches_finite_differences(G):
    t = np.linspace(0.8, 1.3, 101)
    h = 1e-6
    fd = (G(t + h) - G(t - h)) / (2 * h)
    assert np.allclose(G.derivative(t), fd, atol=1e-7)


def test_G_log_input_survives_underflow(G):
    H, slope = G.both_log(np.array([-1e4, 0.0, 10.0]))
    assert np.array_equal(H[:1], [1.0]) and slope[0] == 0.0
    assert math.isclose(H[2], math.exp(10.0))


def test_G_infeasible():
    with pytest.raises(InfeasibleRamp):
        build_G(2.5, 0.7)
    with pytest.raises(InfeasibleRamp):
        build_G(1.0, 0.7)
