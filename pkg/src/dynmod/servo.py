"""Factory joint servo: decentralized PI velocity or PID position control.

The servo is sealed; the only inputs the outer loop may set are the joint
position and velocity commands. Every joint is independent, so each output
component depends only on the same component of every input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

PI_VELOCITY = "pi_velocity"
PID_POSITION = "pid_position"
MODES = (PI_VELOCITY, PID_POSITION)


@dataclass
class InnerGains:
    """Diagonal servo gains. ``kd`` is required iff ``mode`` is PID position."""

    mode: str
    kp: np.ndarray
    ki: np.ndarray
    kd: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown servo mode {self.mode!r}; expected one of {MODES}")
        self.kp = _positive_diag(self.kp, "kp")
        self.ki = _positive_diag(self.ki, "ki")
        if self.mode == PID_POSITION:
            if self.kd is None:
                raise ValueError("PID position servo needs kd")
            self.kd = _positive_diag(self.kd, "kd")
        elif self.kd is not None:
            raise ValueError("PI velocity servo takes no kd")

    @property
    def code(self) -> int:
        return _kernels.PI_VELOCITY if self.mode == PI_VELOCITY else _kernels.PID_POSITION

    def kernel_args(self):
        kd = self.kd if self.kd is not None else np.zeros(3)
        return self.code, self.kp, self.ki, kd


def _positive_diag(v, name):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape == (1,):
        arr = np.repeat(arr, 3)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"servo gain {name} must have positive finite diagonal entries")
    return arr


@dataclass
class ServoCommand:
    """Position and velocity command, held between outer ticks."""

    q_c: np.ndarray
    qd_c: np.ndarray

    def __post_init__(self):
        self.q_c = np.asarray(self.q_c, dtype=float)
        self.qd_c = np.asarray(self.qd_c, dtype=float)
        if not (np.all(np.isfinite(self.q_c)) and np.all(np.isfinite(self.qd_c))):
            raise ValueError("servo command must be finite")


@dataclass
class ServoState:
    """Integral of (q - q_c) for the PID servo, advanced by the trapezoidal rule."""

    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_error: np.ndarray | None = None

    def reset(self):
        self.integral = np.zeros(3)
        self.last_error = None


def pi_velocity(q, qd, cmd: ServoCommand, gains: InnerGains) -> np.ndarray:
    """u = -K_P (qd - qd_c) - K_I (q - q_c)."""
    if gains.mode != PI_VELOCITY:
        raise ValueError("gains are not for a PI velocity servo")
    return _kernels.servo_output(_kernels.PI_VELOCITY, gains.kp, gains.ki, np.zeros(3),
                                 np.asarray(q, dtype=float), np.asarray(qd, dtype=float),
                                 cmd.q_c, cmd.qd_c, np.zeros(3))


def pid_position(q, qd, cmd: ServoCommand, state: ServoState, gains: InnerGains, dt: float):
    """u = -K_D (qd - qd_c) - K_P (q - q_c) - K_I int(q - q_c).

    Returns ``(u, state)``; ``state`` is updated in place. The first call
    after a reset only records the error, so the integral starts at zero.
    """
    if gains.mode != PID_POSITION:
        raise ValueError("gains are not for a PID position servo")
    q = np.asarray(q, dtype=float)
    err = q - cmd.q_c
    if state.last_error is not None:
        state.integral = state.integral + 0.5 * dt * (state.last_error + err)
    state.last_error = err
    u = _kernels.servo_output(_kernels.PID_POSITION, gains.kp, gains.ki, gains.kd,
                              q, np.asarray(qd, dtype=float), cmd.q_c, cmd.qd_c, state.integral)
    return u, state


def effective_gains(gains: InnerGains, motor_gain) -> dict:
    """Torque-level gains K*K_P, K*K_I (and K*K_D) seen by the arm."""
    k = np.asarray(motor_gain, dtype=float)
    out = {"kp": k * gains.kp, "ki": k * gains.ki}
    if gains.kd is not None:
        out["kd"] = k * gains.kd
    return out
