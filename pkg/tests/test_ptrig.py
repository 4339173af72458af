import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from plapshoot.errors import DomainError
from plapshoot.ptrig import (PExponent, PolarState, cartesian_to_polar, conjugate, half_period,
                             polar_to_cartesian, sincos_q)

P_VALUES = [1.5, 2.0, 2.5, 3.0]


def identity_error(t, p):
    q = conjugate(p)
    s, c = sincos_q(t, p)
    return np.abs(np.abs(c) ** p / p + np.abs(s) ** q / q - 1.0 / p)


def ode_quarter_period(p):
    """Time for x' = -phi_q(y), y' = phi_p(x) from (1, 0) to reach x = 0."""
    q = conjugate(p)

    def rhs(t, z):
        x, y = z
        return [-np.sign(y) * abs(y) ** (q - 1), np.sign(x) * abs(x) ** (p - 1)]

    hit = lambda t, z: z[0]
    hit.terminal = True
    sol = solve_ivp(rhs, (0, 10), [1.0, 0.0], method="DOP853", rtol=1e-13, atol=1e-15,
                    events=hit)
    return sol.t_events[0][0]


def test_pexponent_conjugate():
    e = PExponent(3.0)
    assert e.q == pytest.approx(1.5)
    assert 1 / e.p + 1 / e.q == pytest.approx(1.0)


@pytest.mark.parametrize("bad", [1.0, 0.5, -2.0, math.inf, math.nan])
def test_bad_exponent_rejected(bad):
    with pytest.raises(DomainError):
        half_period(bad)


def test_half_period_classical():
    assert abs(half_period(2.0) - math.pi) < 1e-12


@pytest.mark.parametrize("p", [1.5, 2.5, 3.0, 6.0])
def test_half_period_against_ode_oracle(p):
    assert abs(half_period(p) - 2 * ode_quarter_period(p)) < 1e-8


@pytest.mark.parametrize("p", [1.5, 2.5, 3.0, 6.0])
def test_half_period_against_beta_closed_form(p):
    q = conjugate(p)
    closed = 2 * (q / p) ** (1 / q) * (math.pi / q) / math.sin(math.pi / q)
    assert abs(half_period(p) - closed) < 1e-12


def test_half_period_conjugate_symmetry():
    assert abs(half_period(3.0) - half_period(1.5)) < 1e-12


def test_sincos_at_zero():
    s, c = sincos_q(0.0, 3.0)
    assert (s, c) == (0.0, 1.0)


def test_sincos_classical():
    t = np.linspace(-20, 20, 2001)
    s, c = sincos_q(t, 2.0)
    np.testing.assert_allclose(s, np.sin(t), atol=1e-10)
    np.testing.assert_allclose(c, np.cos(t), atol=1e-10)
    s, c = sincos_q(math.pi / 2, 2.0)
    assert abs(s - 1) < 1e-12 and abs(c) < 1e-12


def test_quarter_period_value_p3():
    p = 3.0
    q = conjugate(p)
    s, c = sincos_q(half_period(p) / 2, p)
    assert abs(c) < 1e-12
    assert abs(s - (q / p) ** (1 / q)) < 1e-12


@pytest.mark.parametrize("p", [1.5, 3.0, 6.0])
def test_sincos_matches_ode(p):
    q = conjugate(p)

    def rhs(t, z):
        x, y = z
        return [-np.sign(y) * abs(y) ** (q - 1), np.sign(x) * abs(x) ** (p - 1)]

    t = np.linspace(0, 2 * half_period(p), 400)
    sol = solve_ivp(rhs, (0, t[-1]), [1.0, 0.0], method="DOP853", rtol=1e-13, atol=1e-15,
                    t_eval=t)
    s, c = sincos_q(t, p)
    np.testing.assert_allclose(c, sol.y[0], atol=1e-9)
    np.testing.assert_allclose(s, sol.y[1], atol=1e-9)


def test_sincos_rejects_nonfinite():
    with pytest.raises(DomainError):
        sincos_q(math.nan, 2.0)


@pytest.mark.parametrize("p", P_VALUES)
def test_identity_dense(p):
    t = np.linspace(-50, 50, 20001)
    assert identity_error(t, p).max() <= 1e-10


@settings(max_examples=200, deadline=None)
@given(t=st.floats(-1e3, 1e3), p=st.sampled_from(P_VALUES + [4.0]))
def test_identity_property(t, p):
    assert identity_error(t, p) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(t=st.floats(-100, 100), p=st.sampled_from(P_VALUES))
def test_periodicity_property(t, p):
    a = np.array(sincos_q(t, p))
    b = np.array(sincos_q(t + 2 * half_period(p), p))
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_polar_examples():
    assert polar_to_cartesian(PolarState(1.0, 0.0), 2.5) == pytest.approx((1.0, 0.0))
    lam = 3.7
    u, v = polar_to_cartesian(PolarState(lam ** 2.5, 0.0), 2.5)
    assert u == pytest.approx(lam, rel=1e-14) and v == 0.0
    rho, theta = 2.3, 0.7
    u, v = polar_to_cartesian(PolarState(rho, theta), 2.0)
    assert (u, v) == pytest.approx((math.sqrt(rho) * math.cos(theta), math.sqrt(rho) * math.sin(theta)))


def test_polar_negative_rho():
    with pytest.raises(DomainError):
        polar_to_cartesian(PolarState(-1.0, 0.0), 2.0)


def test_cartesian_axes():
    st_ = cartesian_to_polar(2.0, 0.0, 3.0)
    assert st_.rho == pytest.approx(8.0) and st_.theta == 0.0
    st_ = cartesian_to_polar(0.0, 1.3, 3.0)
    assert abs(st_.theta - half_period(3.0) / 2) < 1e-12
    st_ = cartesian_to_polar(0.0, 0.0, 3.0)
    assert (st_.rho, st_.theta) == (0.0, 0.0)


def test_cartesian_classical_angle():
    rng = np.random.default_rng(1)
    u, v = rng.normal(size=(2, 500))
    st_ = cartesian_to_polar(u, v, 2.0)
    np.testing.assert_allclose(st_.theta, np.mod(np.arctan2(v, u), 2 * np.pi), atol=1e-10)
    np.testing.assert_allclose(st_.rho, u ** 2 + v ** 2, rtol=1e-14)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(-1e3, 1e3), v=st.floats(-1e3, 1e3), p=st.sampled_from([1.5, 2.0, 2.5, 3.0]))
def test_round_trip_property(u, v, p):
    if abs(u) + abs(v) < 1e-6:
        return
    st_ = cartesian_to_polar(u, v, p)
    assert 0.0 <= st_.theta < 2 * half_period(p)
    u2, v2 = polar_to_cartesian(st_, p)
    scale = max(abs(u), abs(v), 1.0)
    assert abs(u2 - u) <= 1e-8 * scale
    assert abs(v2 - v) <= 1e-8 * scale


@settings(max_examples=100, deadline=None)
@given(rho=st.floats(1e-6, 1e6), theta=st.floats(0, 50), p=st.sampled_from(P_VALUES))
def test_rho_reconstruction_property(rho, theta, p):
    u, v = polar_to_cartesian(PolarState(rho, theta), p)
    back = cartesian_to_polar(u, v, p)
    assert abs(back.rho - rho) <= 1e-9 * rho
    period = 2 * half_period(p)
    d = (back.theta - theta) % period
    assert min(d, period - d) <= 1e-8
