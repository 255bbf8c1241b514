import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from vtolflight.actuators import (ActuatorCommand, ActuatorLimits, ActuatorState,
                                  PwmCalibration, actuator_step, default_calibration,
                                  pwm_decode, pwm_encode)
from vtolflight.plant import (DivergenceError, Environment, VehicleParams, VehicleState,
                              advance, aero_force, aero_torque, derivative, plant_step,
                              rotor_matrix, surface_matrix, thrust_force, zero_lift_axes)

P = VehicleParams()
I3 = np.eye(3)


def test_params_validation():
    for bad in (dict(m=0), dict(J=(1, -1, 1)), dict(S=0), dict(c0=6.0), dict(f=-0.1)):
        with pytest.raises(ValueError):
            VehicleParams(**bad)


# ---------------------------------------------------------------- aero force

def test_aero_force_vanishes_at_rest():
    assert np.array_equal(aero_force(np.zeros(3), I3, P), np.zeros(3))


def test_aero_force_along_zero_lift_line():
    i2, _ = zero_lift_axes(I3, P.alpha0)
    F = aero_force(20 * i2, I3, P)
    # 1/2 * 1.2 * 0.868 * 400 * 0.074
    assert np.allclose(F, -15.41568 * i2, atol=1e-9)


def test_aero_force_along_k2_is_pure_normal():
    _, k2 = zero_lift_axes(I3, P.alpha0)
    F = aero_force(7.0 * k2, I3, P)
    assert np.allclose(F, -0.5 * P.rho * P.S * 49.0 * P.c0bar * k2, atol=1e-12)


@given(st.integers(0, 2**31), st.floats(0, 40))
def test_aero_force_matches_oracle_and_dissipates(seed, speed):
    rng = np.random.default_rng(seed)
    R = oracles.random_frame(rng)
    va = speed * oracles.random_unit(rng)
    F = aero_force(va, R, P)
    ref = oracles.aero_force(va, R, P.rho, P.S, P.c0, P.c0bar, P.c0bb, P.alpha0)
    assert np.allclose(F, ref, atol=1e-10)
    assert F @ va <= 1e-12


# ---------------------------------------------------------------- thrust

def test_thrust_force_examples():
    assert np.allclose(thrust_force(171.675, 0, I3), [0, 0, -171.675])
    assert np.allclose(thrust_force(0, 30, I3), [30, 0, 0])
    T = thrust_force(40, 30, I3)
    assert math.isclose(np.linalg.norm(T), 50.0)
    assert math.isclose(math.atan2(T[2], T[0]), math.atan2(-40, 30))
    assert math.isclose(math.atan2(-40, 30), -0.927295218, rel_tol=1e-9)
    with pytest.raises(ValueError):
        thrust_force(-1, 0, I3)


# ---------------------------------------------------------------- aero torque

def test_aero_torque_zero_at_rest_on_zero_lift_line():
    i2 = np.array([math.cos(P.alpha0), 0, -math.sin(P.alpha0)])
    assert np.allclose(aero_torque(np.zeros(3), 15 * i2, P), 0, atol=1e-12)


def test_aero_torque_roll_damping_sign():
    M = aero_torque(np.array([0.5, 0, 0]), np.array([15.0, 0, 0]), P)
    assert M[0] < 0


def test_aero_torque_scales_with_dynamic_pressure():
    va = np.array([12.0, 1.5, 2.0])
    M1 = aero_torque(np.zeros(3), va, P)
    M2 = aero_torque(np.zeros(3), 2 * va, P)
    assert np.linalg.norm(M1) > 0
    assert np.allclose(M2, 4 * M1, rtol=1e-12)


# ---------------------------------------------------------------- integration

def _quiet(**kw):
    # aerodynamics negligible: tiny air density
    return VehicleParams(rho=1e-300, **kw)


def test_free_drift():
    # wind moving with the vehicle: no air velocity, no aerodynamics
    p = VehicleParams(g0=0.0)
    s = VehicleState(v=np.array([1.0, 0, 0]))
    out = plant_step(s, np.zeros(8), Environment(np.array([1.0, 0, 0])), p, 0.001)
    assert np.allclose(out.r, [0.001, 0, 0], atol=1e-15)
    assert np.array_equal(out.v, [1.0, 0, 0])


def test_gravity_from_rest():
    p = _quiet()
    out = plant_step(VehicleState(), np.zeros(8), Environment(), p, 0.001)
    assert np.allclose(out.v, [0, 0, 9.81 * 0.001], atol=1e-12)


def test_hover_equilibrium():
    t = np.linalg.solve(oracles.rotor_matrix(P.d, P.e, P.f, P.eta),
                        [P.m * P.g0, 0, 0, 0])
    act = np.concatenate((t, np.zeros(4)))
    s = VehicleState()
    for _ in range(1000):
        s = plant_step(s, act, Environment(), P, 0.001)
    assert np.linalg.norm(s.v) < 1e-9
    assert np.linalg.norm(s.omega) < 1e-9


def test_plant_step_rejects_bad_dt_and_nan():
    with pytest.raises(ValueError):
        plant_step(VehicleState(), np.zeros(8), Environment(), P, 0.05)
    bad = VehicleState(v=np.array([np.nan, 0, 0]))
    with pytest.raises(DivergenceError):
        plant_step(bad, np.zeros(8), Environment(), P, 0.001)


def _random_state(rng):
    return VehicleState(rng.normal(size=3), rng.normal(size=3) * 8,
                        oracles.random_frame(rng), rng.normal(size=3) * 0.5)


def _moment(w, va_b):
    return aero_torque(w, va_b, P)


@given(st.integers(0, 2**31))
def test_derivative_matches_newton_euler_oracle(seed):
    rng = np.random.default_rng(seed)
    s = _random_state(rng)
    act = np.concatenate((rng.uniform(0, 80, 4), [rng.uniform(0, 100)],
                          rng.uniform(-0.5, 0.5, 3)))
    wind = np.array([-3.0, 1.0, 0.0])
    f = oracles.rigid_body_rhs(P, act, wind, _moment)
    assert np.allclose(derivative(s, act, P, wind), f(0, s.to_array()), atol=1e-9)


def test_step_matches_accurate_integration():
    rng = np.random.default_rng(7)
    s = _random_state(rng)
    act = np.array([50.0, 45, 47, 49, 20, 0.1, -0.05, 0.02])
    wind = np.array([-3.0, 1.0, 0.0])
    f = oracles.rigid_body_rhs(P, act, wind, _moment)
    ref = oracles.integrate(f, s.to_array(), 0.001)
    out = plant_step(s, act, Environment(wind), P, 0.001).to_array()
    assert np.abs(out - ref).max() < 1e-11


def test_rk4_fourth_order():
    rng = np.random.default_rng(11)
    s = _random_state(rng)
    act = np.array([50.0, 45, 47, 49, 20, 0.1, -0.05, 0.02])
    f = oracles.rigid_body_rhs(P, act, np.zeros(3), _moment)
    errs = []
    for dt in (0.02, 0.01):
        ref = oracles.integrate(f, s.to_array(), dt)
        errs.append(np.abs(plant_step(s, act, Environment(), P, dt).to_array() - ref).max())
    ratio = errs[0] / errs[1]
    assert 16 * 0.6 < ratio < 32 * 1.4     # local error O(dt^5)


def test_orthonormality_over_a_million_steps():
    s = VehicleState(R=oracles.rot([1, 2, 3], 0.5), omega=np.array([1.0, -2.0, 3.0]))
    lim = ActuatorLimits()
    out, _ = advance(s.to_array(), np.zeros(8), np.zeros(8), _quiet(g0=0.0).pack(),
                     surface_matrix(P), np.zeros(3), 0.001, 1_000_000,
                     lim.lag_gains(0.001), lim.lower, lim.upper)
    R = out[6:15].reshape(3, 3)
    assert np.abs(R.T @ R - I3).max() < 1e-10
    assert np.abs(np.cross(R[:, 0], R[:, 1]) - R[:, 2]).max() < 1e-10


def test_energy_dissipation_without_thrust():
    rng = np.random.default_rng(5)
    for _ in range(50):
        s = _random_state(rng)
        dx = derivative(s, np.zeros(8), P)
        # d/dt (m|v|^2/2) - m g.v equals the aerodynamic power
        power = P.m * (s.v @ dx[3:6]) - P.m * P.g0 * s.v[2]
        assert power <= 1e-9


def test_forward_rotor_torque_equals_matrix():
    A = rotor_matrix(P)
    assert np.allclose(A, oracles.rotor_matrix(P.d, P.e, P.f, P.eta), atol=0)
    rng = np.random.default_rng(2)
    p = _quiet(g0=0.0)
    for _ in range(20):
        t = rng.uniform(0, 80, 4)
        dx = derivative(VehicleState(), np.concatenate((t, np.zeros(4))), p)
        assert np.allclose(dx[15:18] * np.array(p.J), (A @ t)[1:], atol=1e-12)


def test_surface_matrix_per_radian():
    B = surface_matrix(P)
    d = np.radians([1.0, 0.0, 0.0])
    assert math.isclose((B @ d)[0], 0.5 * P.S * P.b * P.Cl_da, rel_tol=1e-12)


# ---------------------------------------------------------------- actuators

def test_actuator_fixed_point_and_lag():
    lim = ActuatorLimits()
    st0 = ActuatorState(np.array([10.0, 10, 10, 10, 5, 0.1, 0, 0]))
    same = actuator_step(st0.realized.copy(), st0, 0.004, lim)
    assert np.array_equal(same.realized, st0.realized)
    step = np.array([40.0, 40, 40, 40, 40, 0.2, 0.2, 0.2])
    s = ActuatorState()
    n = 100
    for _ in range(n):
        s = actuator_step(step, s, lim.tau_rotor / n, lim)
    assert np.allclose(s.realized[0:5] / step[0:5], 1 - math.exp(-1), rtol=1e-12)
    assert math.isclose(1 - math.exp(-1), 0.632, abs_tol=5e-4)


def test_actuator_command_above_bound_converges_to_bound():
    lim = ActuatorLimits()
    s = ActuatorState()
    cmd = ActuatorCommand(np.full(4, 500.0), 500.0, np.full(3, 2.0))
    for _ in range(2000):
        s = actuator_step(cmd, s, 0.001, lim)
    assert np.allclose(s.realized, lim.upper)
    assert np.all(s.realized <= lim.upper)


def test_pwm_endpoints():
    lim = ActuatorLimits()
    assert np.all(pwm_encode(np.array([0.0] * 5 + [-lim.surface_max] * 3)) == 1000)
    assert np.all(pwm_encode(lim.upper) == 2000)
    with pytest.raises(ValueError):
        pwm_decode(np.full(8, 2500))
    with pytest.raises(ValueError):
        PwmCalibration(1.0, 0.0)


@pytest.mark.parametrize("kind", ["affine", "quadratic"])
def test_pwm_round_trip(kind):
    lim = ActuatorLimits()
    cal = default_calibration(lim, kind)
    rng = np.random.default_rng(0)
    span = lim.upper - lim.lower
    worst = np.zeros(8)
    for _ in range(500):
        u = rng.uniform(lim.lower, lim.upper)
        back = pwm_decode(pwm_encode(u, cal), cal).to_array()
        worst = np.maximum(worst, np.abs(back - u))
    if kind == "affine":
        assert np.all(worst <= span / 1000)
    else:
        # slope of the square law at full scale doubles the step
        assert np.all(worst <= 2 * span / 1000)
