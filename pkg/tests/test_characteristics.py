import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfnlab.characteristics import (
    Direction,
    check_noncrossing,
    chi,
    observability_certificate,
    shock_time,
    solve_inviscid_linear,
    theorem4_oracle,
    trace,
)
from bfnlab.core import CrossingError, Field, Gain, Grid1D, NamedProfile

HALF = (0.0, 0.5)


def unit(T, n=64, nt=64):
    return trace(1.0, Grid1D(n).x, T, nt)


# -- tracing -----------------------------------------------------------------------


def test_constant_speed_is_exact():
    cf = unit(0.7, nt=7)
    feet = Grid1D(64).x
    for s, row in zip(cf.times, cf.unwrapped):
        np.testing.assert_allclose(row, feet + s, rtol=0, atol=1e-15)
    assert np.all((cf.positions >= 0) & (cf.positions < 1))


def test_zero_speed():
    cf = trace(0.0, Grid1D(16).x, 1.0, 4)
    assert np.all(cf.positions == cf.feet)


def test_positions_start_at_feet():
    feet = np.linspace(0, 1, 11, endpoint=False)
    cf = trace(lambda t, x: 2 + np.sin(2 * np.pi * x), feet, 0.5, 10)
    assert np.array_equal(cf.positions[0], feet)


def test_variable_speed_refinement():
    a = lambda t, x: np.sin(2 * np.pi * x) + 2  # noqa: E731
    coarse = trace(a, [0.0], 0.3, 128).unwrapped[-1, 0]
    fine = trace(a, [0.0], 0.3, 1280).unwrapped[-1, 0]
    assert abs(coarse - fine) <= 1e-9


def test_crossing_detected():
    times = np.array([0.0, 1.0])
    paths = np.array([[0.1, 0.2], [0.5, 0.4]])
    with pytest.raises(CrossingError):
        check_noncrossing(paths, times)


def test_wrapped_order_is_not_a_crossing():
    cf = unit(0.9, n=8, nt=9)
    check_noncrossing(cf.unwrapped, cf.times)


# -- occupation times -------------------------------------------------------------------


def test_chi_full_support():
    np.testing.assert_allclose(chi(Gain(1.0), unit(0.6)), 0.6, rtol=0, atol=1e-15)


def test_chi_half_support_one_loop():
    np.testing.assert_allclose(chi(Gain(1.0, support=HALF), unit(1.0)), 0.5, rtol=0, atol=1e-14)


def test_chi_foot_that_misses_support():
    cf = trace(1.0, [0.75], 0.25, 16)
    assert chi(Gain(1.0, support=HALF), cf)[0] == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(steps=st.integers(4, 96), extra=st.integers(0, 32), a=st.floats(0, 0.8), w=st.floats(0.05, 0.2))
def test_chi_is_one_lipschitz_in_T(steps, extra, a, w):
    # A shared step size makes the shorter run a prefix of the longer one.
    dt = 1 / 64
    gain = Gain(1.0, support=(a, a + w))
    feet = Grid1D(32).x
    speed = lambda t, x: 1.5 + 0.5 * np.sin(2 * np.pi * x)  # noqa: E731
    c1 = chi(gain, trace(speed, feet, steps * dt, steps))
    c2 = chi(gain, trace(speed, feet, (steps + extra) * dt, steps + extra))
    assert np.all(c2 - c1 >= -1e-12)
    assert np.all(c2 - c1 <= extra * dt + 1e-12)


@pytest.mark.parametrize("T,m,observable", [(1.0, 0.5, True), (0.25, 0.0, False), (0.51, 0.01, True)])
def test_certificate(T, m, observable):
    cert = observability_certificate(Gain(1.0, support=HALF), unit(T, nt=51), 0.0)
    assert cert.m == pytest.approx(m, abs=1e-12)
    assert cert.observable is observable
    if observable:
        assert cert.K_threshold == 0.0


# -- closed form along curves --------------------------------------------------------------


@pytest.mark.parametrize("gain,expected", [
    (Gain(1.0), math.exp(-2.0)),
    (Gain(1.0, window=(0.25, 0.75)), math.exp(-1.0)),
    (Gain(1.0, support=HALF), math.exp(-1.0)),
])
def test_theorem4_oracle_at_zero(gain, expected):
    np.testing.assert_allclose(theorem4_oracle(gain, unit(1.0), 0.0), expected, rtol=1e-14)


def test_pure_transport():
    g = Grid1D(128)
    u0 = NamedProfile("sin2pi", 0.7, phase=0.3)
    cf = trace(1.0, g.x, 0.37, 37)
    traj = solve_inviscid_linear(Gain(0.0), Direction.FORWARD, u0.field(g), None, cf)
    np.testing.assert_allclose(traj.chars.carried[-1], u0(g.x), atol=1e-15)
    np.testing.assert_allclose(traj.final.values, u0(g.x - 0.37), atol=1e-9)


def test_full_gain_decay_along_curves():
    g = Grid1D(64)
    u0 = NamedProfile("sin2pi").field(g)
    traj = solve_inviscid_linear(Gain(1.0), Direction.FORWARD, u0, None, trace(1.0, g.x, 1.0, 32))
    np.testing.assert_allclose(traj.chars.carried[-1], u0.values * math.exp(-1.0), atol=1e-15)


def test_supported_gain_ratio_is_exp_minus_chi():
    g = Grid1D(64)
    gain = Gain(1.0, support=HALF)
    cf = trace(1.0, g.x, 0.8, 40)
    u0 = NamedProfile("sin2pi", phase=0.4).field(g)
    traj = solve_inviscid_linear(gain, Direction.FORWARD, u0, None, cf)
    np.testing.assert_allclose(traj.chars.carried[-1] / u0.values, np.exp(-chi(gain, cf)), rtol=1e-8)


@pytest.mark.parametrize("gain", [Gain(1.0), Gain(2.0, 0.5, window=(0.2, 0.7)), Gain(1.0, support=(0.1, 0.45))])
def test_forward_backward_matches_oracle(gain):
    g = Grid1D(128)
    cf = trace(1.0, g.x, 1.0, 128)
    seed = NamedProfile("sin2pi", 0.1, phase=0.5)
    obs = solve_inviscid_linear(Gain(0.0), Direction.FORWARD, seed.field(g), None, cf)
    u0 = NamedProfile("sin2pi", 0.4).field(g)
    fwd = solve_inviscid_linear(gain, Direction.FORWARD, u0, obs, cf)
    bwd = solve_inviscid_linear(gain, Direction.BACKWARD, fwd.chars, obs, cf)
    w0 = fwd.chars.carried[0] - seed(g.x)
    wt0 = bwd.chars.carried[0] - seed(g.x)
    np.testing.assert_allclose(wt0, theorem4_oracle(gain, cf, 0.0) * w0, atol=1e-6)


def test_translation_equivariance():
    g = Grid1D(64)
    shift = 8
    s = shift / g.n
    cf = trace(1.0, g.x, 0.6, 60)
    base = solve_inviscid_linear(Gain(1.0, support=(0.1, 0.4)), Direction.FORWARD,
                                 NamedProfile("sin2pi", phase=0.2).field(g), None, cf)
    moved_u0 = Field(g, NamedProfile("sin2pi", phase=0.2)(g.x - s))
    moved = solve_inviscid_linear(Gain(1.0, support=(0.1 + s, 0.4 + s)), Direction.FORWARD, moved_u0, None, cf)
    np.testing.assert_allclose(moved.final.values, np.roll(base.final.values, shift), atol=1e-6)


# -- shock time ---------------------------------------------------------------------------


def test_shock_time_constant():
    assert shock_time(Field(Grid1D(16), np.full(16, 2.0))) == math.inf


@pytest.mark.parametrize("alpha", [0.1, 0.2, 0.5])
def test_shock_time_sine(alpha):
    u0 = NamedProfile("sin2pi", alpha).field(Grid1D(512))
    assert shock_time(u0) == pytest.approx(1 / (2 * math.pi * alpha), rel=0.02)


def test_shock_time_grows_as_slope_shrinks():
    g = Grid1D(256)
    times = [shock_time(NamedProfile("sin2pi", a, offset=5.0).field(g)) for a in (1e-1, 1e-2, 1e-3)]
    assert times[0] < times[1] < times[2]
