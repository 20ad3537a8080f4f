import numpy as np
import pytest

from dynmod.servo import (InnerGains, ServoCommand, ServoState, effective_gains, pi_velocity,
                          pid_position)

PI = InnerGains("pi_velocity", [30.0, 20.0, 10.0], [15.0, 10.0, 5.0])
PID = InnerGains("pid_position", 15.0, 10.0, 30.0)


def test_pi_velocity_law():
    q, qd = np.array([0.1, 0.2, 0.3]), np.array([1.0, -1.0, 0.5])
    cmd = ServoCommand([0.0, 0.5, 0.3], [0.5, 0.0, 0.0])
    u = pi_velocity(q, qd, cmd, PI)
    np.testing.assert_allclose(u, -PI.kp * (qd - cmd.qd_c) - PI.ki * (q - cmd.q_c))


def test_pi_velocity_is_decoupled():
    q, qd = np.zeros(3), np.zeros(3)
    base = pi_velocity(q, qd, ServoCommand(np.zeros(3), np.zeros(3)), PI)
    moved = pi_velocity(q, qd, ServoCommand([0.0, 1.0, 0.0], np.zeros(3)), PI)
    changed = np.flatnonzero(moved != base)
    assert list(changed) == [1]


def test_pid_integral_is_trapezoidal():
    state, dt = ServoState(), 0.5e-3
    cmd = ServoCommand(np.zeros(3), np.zeros(3))
    e1, e2 = np.array([0.1, 0.0, -0.1]), np.array([0.3, 0.2, -0.1])
    pid_position(e1, np.zeros(3), cmd, state, PID, dt)
    np.testing.assert_array_equal(state.integral, np.zeros(3))
    u, state = pid_position(e2, np.zeros(3), cmd, state, PID, dt)
    integral = 0.5 * dt * (e1 + e2)
    np.testing.assert_allclose(state.integral, integral)
    np.testing.assert_allclose(u, -PID.kp * e2 - PID.ki * integral)
    state.reset()
    assert state.last_error is None


def test_mode_mismatch_is_rejected():
    cmd = ServoCommand(np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        pi_velocity(np.zeros(3), np.zeros(3), cmd, PID)
    with pytest.raises(ValueError):
        pid_position(np.zeros(3), np.zeros(3), cmd, ServoState(), PI, 1e-3)


@pytest.mark.parametrize("kwargs", [
    dict(mode="torque", kp=1.0, ki=1.0),
    dict(mode="pi_velocity", kp=-1.0, ki=1.0),
    dict(mode="pi_velocity", kp=1.0, ki=1.0, kd=1.0),
    dict(mode="pid_position", kp=1.0, ki=1.0),
])
def test_gain_validation(kwargs):
    with pytest.raises(ValueError):
        InnerGains(**kwargs)


def test_command_must_be_finite():
    with pytest.raises(ValueError):
        ServoCommand([np.nan, 0.0, 0.0], np.zeros(3))


def test_effective_gains():
    g = effective_gains(PID, [60.0, 30.0, 10.0])
    np.testing.assert_allclose(g["kp"], [900.0, 450.0, 150.0])
    np.testing.assert_allclose(g["kd"], [1800.0, 900.0, 300.0])
    assert "kd" not in effective_gains(PI, 1.0)
