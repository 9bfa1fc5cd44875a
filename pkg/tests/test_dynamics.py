import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cacc_dift.dynamics import EULER, SimulationError, VehicleState, step_plant


@pytest.mark.parametrize(
    "pos, vel, u, T, exp_pos, exp_vel",
    [
        (0.0, 25.0, 0.0, 0.1, 2.5, 25.0),
        (0.0, 0.0, 2.0, 0.5, 0.25, 1.0),
        (0.0, 25.0, -1.0, 0.1, 2.495, 24.9),
    ],
)
def test_step_plant_examples(pos, vel, u, T, exp_pos, exp_vel):
    out = step_plant(VehicleState(pos, vel), u, T)
    assert out.position == pytest.approx(exp_pos, rel=1e-12)
    assert out.velocity == pytest.approx(exp_vel, rel=1e-12)
    assert out.accel_cmd == u


def test_initial_filter_states_are_zero():
    s = VehicleState(0.0, 25.0)
    assert s.ff_state_1 == 0.0 and s.ff_state_2 == 0.0


def test_euler_drops_quadratic_term():
    out = step_plant(VehicleState(0.0, 0.0), 2.0, 0.5, EULER)
    assert out.position == 0.0
    assert out.velocity == 1.0


def test_step_plant_keeps_filter_states():
    out = step_plant(VehicleState(1.0, 2.0, 0.0, 0.3, 0.4), 1.0, 0.1)
    assert (out.ff_state_1, out.ff_state_2) == (0.3, 0.4)


@pytest.mark.parametrize("u", [math.nan, math.inf])
def test_non_finite_input_reports_vehicle_and_step(u):
    with pytest.raises(SimulationError, match="vehicle 3, step 17"):
        step_plant(VehicleState(0.0, 1.0), u, 0.1, vehicle=3, step=17)


def test_rejects_non_positive_period():
    with pytest.raises(ValueError):
        step_plant(VehicleState(0.0, 1.0), 0.0, 0.0)


finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(x0=finite, v0=finite, u=st.floats(-5, 5), T=st.floats(0.001, 0.5), n=st.integers(1, 400))
def test_constant_command_matches_closed_form(x0, v0, u, T, n):
    s = VehicleState(x0, v0)
    for _ in range(n):
        s = step_plant(s, u, T)
    t = n * T
    expected = x0 + v0 * t + 0.5 * u * t * t
    assert s.position == pytest.approx(expected, rel=1e-9, abs=1e-9 * (abs(x0) + abs(v0) * t + abs(u) * t * t + 1))


@settings(max_examples=200, deadline=None)
@given(v0=st.integers(-3200, 3200), u=st.integers(-320, 320), T=st.sampled_from([0.5, 0.25, 0.125, 0.0625]))
def test_plus_minus_command_restores_velocity(v0, u, T):
    # dyadic speeds, commands and periods keep every sum exact
    v0, u = v0 / 64, u / 64
    s = step_plant(step_plant(VehicleState(0.0, v0), u, T), -u, T)
    assert s.velocity == v0


@settings(max_examples=100, deadline=None)
@given(dv=st.floats(-5, 5), u=st.floats(-2, 2), n=st.integers(1, 100))
def test_galilean_shift(dv, u, n):
    T = 0.1
    a, b = VehicleState(0.0, 20.0), VehicleState(0.0, 20.0 + dv)
    for _ in range(n):
        a, b = step_plant(a, u, T), step_plant(b, u, T)
    assert b.position - a.position == pytest.approx(dv * n * T, rel=1e-9, abs=1e-9)
