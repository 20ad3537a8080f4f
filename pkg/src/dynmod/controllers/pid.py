"""Outer loop for a PID position servo, and the plain kinematic baseline.

With a PID servo the reference is split in two. ``v`` (the starred
reference velocity) carries the task, and ``q_r`` follows

    qd_r = v + K_c (q - q_r),

so that ``xi = qd - v = s + K_c (q - q_r)``. The command obeys the
second-order relation

    qd_c + diag(w_P) q_c + diag(w_I) int(q_c - q_r) = v + diag(w_P) q_r + diag(w) comp.

``reference`` selects how ``v`` is built: ``"joint"`` (qd_d - alpha_bar
(q - q_d)), ``"filter"`` (the passive filter with kinematic adaptation) or
``"cartesian"`` (known kinematics, J^+ xd_d - gamma J^T (x - x_d)).
"""

from __future__ import annotations

import numpy as np

from .base import (EstimateState, GainConditionViolated, Layout, OuterConfig,
                   OuterController)
from ..servo import PID_POSITION

REFERENCES = ("joint", "filter", "cartesian")
GOLDEN_BOUND = (np.sqrt(5.0) - 1.0) / 2.0


def kc_bound(kp=None, ki=None, kd=None) -> np.ndarray | float:
    """Smallest admissible k_c per joint (damping neglected).

    Without servo-gain estimates the bound assumes k_P, k_D >= k_I and
    returns (sqrt(5) - 1) / 2.
    """
    if kp is None:
        return GOLDEN_BOUND
    kp, ki, kd = (np.asarray(v, dtype=float) for v in (kp, ki, kd))
    return 2.0 * ki / (kp + np.sqrt(kp * kp + 4.0 * ki * kd))


class PIDOuter(OuterController):
    """Adaptive outer loop for a PID position servo."""

    kind = "pid_outer"
    servo_mode = PID_POSITION
    projected = ("w_I", "w_P")
    adaptive = True

    def __init__(self, config: OuterConfig, initial: EstimateState | None = None, arm=None):
        if config.reference not in REFERENCES:
            raise ValueError(f"unknown reference {config.reference!r}; expected one of {REFERENCES}")
        n = (arm.n if arm is not None else 3)
        self.Kc = config.diag("Kc", n)
        est = config.servo_gain_estimates
        bound = kc_bound(est["kp"], est["ki"], est["kd"]) if est else GOLDEN_BOUND
        if np.any(self.Kc < bound):
            raise GainConditionViolated(
                f"K_c diagonal {self.Kc} is below the admissible bound {np.round(bound, 6)}")
        super().__init__(config, initial, arm)
        self.Lam = config.diag("Lambda", n)
        self.LamP = config.diag("Lambda_P", n)
        self.LamI = config.diag("Lambda_I", n)
        self.Gd = config.matrix("Gamma_d", self.arm.n_dyn)
        if config.reference == "filter":
            self.K1 = config.diag("K1", n)
            self.K2 = config.diag("K2", n)
            self.Gk = config.matrix("Gamma_k", 3)

    def _layout(self):
        n = self.arm.n
        shapes = {}
        if self.config.reference == "filter":
            shapes.update(y=n, a_k=3)
        shapes.update(q_r=n, q_rs=n, q_c=n, zint=n, w=n, a_d=self.arm.n_dyn, w_P=n, w_I=n)
        return Layout(**shapes)

    def _initial_state(self, meas, target):
        e = self.initial
        vals = dict(q_r=meas.q, q_rs=meas.q, q_c=meas.q, w=e.w, a_d=e.a_d, w_P=e.w_P, w_I=e.w_I)
        if self.config.reference == "filter":
            vals.update(a_k=e.a_k)
            if self.config.filter_start == "steady" and meas.x is not None:
                dx = np.asarray(meas.x, dtype=float) - target(meas.t)[0]
                vals.update(y=self.arm.jacobian(meas.q, e.a_k).T @ dx)
        return self.layout.pack(**vals)

    def _reference(self, t, z, meas, target, out):
        """Return ``(v, v_dot, extra_comp, sig)`` and fill filter/a_k rates."""
        cfg = self.config
        L = self.layout
        if cfg.reference == "joint":
            q_d, qd_d, qdd_d = target(t)
            v = qd_d - cfg.alpha_bar * (meas.q - q_d)
            v_dot = qdd_d - cfg.alpha_bar * (meas.qd - qd_d)
            return v, v_dot, None, {"dq": meas.q - q_d}
        if meas.x is None:
            raise ValueError(f"{self.kind} with a {cfg.reference} reference needs the measured task position")
        x = np.asarray(meas.x, dtype=float)
        x_d, xd_d, xdd_d = target(t)
        dx = x - x_d
        if cfg.reference == "filter":
            y, a_k = L.get(z, "y"), L.get(z, "a_k")
            J = self.arm.jacobian(meas.q, a_k)
            self.check_jacobian(J)
            Jt_dx = J.T @ dx
            y_dot = self.K1 * (Jt_dx - y)
            L.set(out, "y", y_dot)
            L.set(out, "a_k", self.Gk @ (self.arm.kinematic_regressor(meas.q, meas.qd).T @ dx))
            return -self.K2 * y, -self.K2 * y_dot, -cfg.alpha * Jt_dx, {"dx": dx, "J": J}
        # cartesian, known kinematics
        a_k = self.initial.a_k
        J = self.arm.jacobian(meas.q, a_k)
        self.check_jacobian(J)
        J_dot = self.arm.jacobian_dot(meas.q, meas.qd, a_k)
        A_inv = np.linalg.inv(J @ J.T)
        p = A_inv @ xd_d
        xdot = J @ meas.qd
        v = J.T @ p - cfg.gamma * (J.T @ dx)
        A_dot = J_dot @ J.T + J @ J_dot.T
        v_dot = (J_dot.T @ p - J.T @ (A_inv @ (A_dot @ p)) + J.T @ (A_inv @ xdd_d)
                 - cfg.gamma * (J_dot.T @ dx + J.T @ (xdot - xd_d)))
        return v, v_dot, None, {"dx": dx, "J": J}

    def rates(self, t, z, meas, target):
        L = self.layout
        out = np.zeros(L.size)
        v, v_dot, extra, sig = self._reference(t, z, meas, target, out)
        q_r, q_c, zint = L.get(z, "q_r"), L.get(z, "q_c"), L.get(z, "zint")
        w, a_d, w_P, w_I = L.get(z, "w"), L.get(z, "a_d"), L.get(z, "w_P"), L.get(z, "w_I")
        qd_r = v + self.Kc * (meas.q - q_r)
        xi = meas.qd - v
        Yd = self.arm.dynamic_regressor(meas.q, meas.qd, v, v_dot)
        comp = Yd @ a_d
        if extra is not None:
            comp = comp + extra
        qd_c = v + w_P * (q_r - q_c) - w_I * zint + w * comp
        L.set(out, "q_r", qd_r)
        L.set(out, "q_rs", v)
        L.set(out, "q_c", qd_c)
        L.set(out, "zint", q_c - q_r)
        L.set(out, "w", -self.Lam * comp * xi)
        L.set(out, "a_d", -self.Gd @ (Yd.T @ xi))
        L.set(out, "w_P", self.LamP * (q_c - q_r) * xi)
        L.set(out, "w_I", self.LamI * zint * xi)
        sig.update(qd_c=qd_c, qd_r=qd_r, qd_rs=v, qdd_rs=v_dot, xi=xi, s=meas.qd - qd_r, comp=comp, Yd=Yd)
        return out, sig


class KinematicController(PIDOuter):
    """Conventional kinematic loop: the servo receives q_c = q_r, qd_c = qd_r."""

    kind = "kinematic"
    projected = ()
    adaptive = False

    def __init__(self, config: OuterConfig, initial: EstimateState | None = None, arm=None):
        if config.reference == "filter":
            raise ValueError("the kinematic baseline supports joint and cartesian references")
        super().__init__(config, initial, arm)

    def _layout(self):
        n = self.arm.n
        return Layout(q_r=n, q_rs=n)

    def _initial_state(self, meas, target):
        return self.layout.pack(q_r=meas.q, q_rs=meas.q)

    def rates(self, t, z, meas, target):
        L = self.layout
        out = np.zeros(L.size)
        v, v_dot, _, sig = self._reference(t, z, meas, target, out)
        q_r = L.get(z, "q_r")
        qd_r = v + self.Kc * (meas.q - q_r)
        L.set(out, "q_r", qd_r)
        L.set(out, "q_rs", v)
        sig.update(qd_c=qd_r, qd_r=qd_r, qd_rs=v, qdd_rs=v_dot, xi=meas.qd - v, s=meas.qd - qd_r)
        return out, sig

    def _emit(self, z, sig):
        return self._command(self.layout.get(z, "q_r"), sig["qd_c"])
