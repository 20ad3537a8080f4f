"""Task-space regulation and tracking behind a PI velocity servo.

Both controllers emit ``(q_c, qd_c)`` from the command ODE

    qd_c + diag(w_I) q_c = qd_r + diag(w_I) q_r + diag(w) comp

where ``comp`` is the scaled dynamic compensation. They differ in how the
joint reference velocity is built: a passive filter on ``J^T dx`` or a
task-space observer, which removes the ``-alpha J^T dx`` term from ``comp``.
"""

from __future__ import annotations

import numpy as np

from .base import (EstimateState, GainConditionViolated, Layout, OuterConfig,
                   ScaledCompensation)


FILTER_STARTS = ("steady", "zero")


class FilterRegulator(ScaledCompensation):
    """Regulation with the adaptive passive filter ``y`` (no task velocity needed).

    ``filter_start="steady"`` starts ``y`` at ``J^T dx`` so the reference
    acceleration does not spike at t = 0; ``"zero"`` starts it at rest.
    """

    kind = "filter_regulator"

    def __init__(self, config: OuterConfig, initial: EstimateState | None = None, arm=None):
        if config.filter_start not in FILTER_STARTS:
            raise ValueError(f"unknown filter_start {config.filter_start!r}; expected one of {FILTER_STARTS}")
        super().__init__(config, initial, arm)
        self.Gk = config.matrix("Gamma_k", 3)
        self.K1 = config.diag("K1", self.arm.n)
        self.K2 = config.diag("K2", self.arm.n)

    def _layout(self):
        n = self.arm.n
        return Layout(y=n, a_k=3, w=n, a_d=self.arm.n_dyn, w_I=n, q_r=n, q_c=n)

    def _initial_state(self, meas, target):
        e = self.initial
        y0 = np.zeros(self.arm.n)
        if self.config.filter_start == "steady":
            # start on the filter's equilibrium so qdd_r(0) = 0
            y0 = self.arm.jacobian(meas.q, e.a_k).T @ (self._measured_x(meas) - target(meas.t)[0])
        return self.layout.pack(y=y0, a_k=e.a_k, w=e.w, a_d=e.a_d, w_I=e.w_I,
                                q_r=meas.q, q_c=meas.q)

    def rates(self, t, z, meas, target):
        L = self.layout
        x = self._measured_x(meas)
        x_d = target(t)[0]
        y, a_k = L.get(z, "y"), L.get(z, "a_k")
        J = self.arm.jacobian(meas.q, a_k)
        self.check_jacobian(J)
        dx = x - x_d
        Jt_dx = J.T @ dx
        y_dot = self.K1 * (Jt_dx - y)
        qd_r = -self.K2 * y
        qdd_r = -self.K2 * y_dot
        out = np.zeros(L.size)
        L.set(out, "y", y_dot)
        L.set(out, "a_k", self.Gk @ (self.arm.kinematic_regressor(meas.q, meas.qd).T @ dx))
        sig = self._dynamic_part(z, meas, qd_r, qdd_r, -self.config.alpha * Jt_dx, out)
        sig.update(dx=dx, J=J)
        return out, sig


class ObserverRegulator(ScaledCompensation):
    """Regulation through a task-space observer ``x_o`` (feedback separation).

    ``qdd_r`` is the exact time derivative of ``qd_r`` along the held
    measurement, the observer and the ``a_k`` adaptation.
    """

    kind = "observer_regulator"
    tracking = False

    def __init__(self, config: OuterConfig, initial: EstimateState | None = None, arm=None):
        if not config.beta > 4.0 * config.gamma / 9.0:
            raise GainConditionViolated(
                f"observer gains need beta > 4*gamma/9; got beta={config.beta}, gamma={config.gamma}")
        super().__init__(config, initial, arm)
        self.Gk = config.matrix("Gamma_k", 3)

    def _layout(self):
        n = self.arm.n
        return Layout(x_o=self.arm.m, a_k=3, w=n, a_d=self.arm.n_dyn, w_I=n, q_r=n, q_c=n)

    def _initial_state(self, meas, target):
        e = self.initial
        return self.layout.pack(x_o=self._measured_x(meas), a_k=e.a_k, w=e.w, a_d=e.a_d, w_I=e.w_I,
                                q_r=meas.q, q_c=meas.q)

    def rates(self, t, z, meas, target):
        L = self.layout
        cfg = self.config
        x = self._measured_x(meas)
        x_d, xd_d, xdd_d = target(t)
        x_o, a_k = L.get(z, "x_o"), L.get(z, "a_k")
        J = self.arm.jacobian(meas.q, a_k)
        self.check_jacobian(J)
        dx = x - x_d
        dxo = x_o - x
        err = x_o - x_d
        qd_r = -cfg.gamma * (J.T @ err)
        ff = self.tracking and (np.any(xd_d) or np.any(xdd_d))
        if ff:
            A_inv = np.linalg.inv(J @ J.T)
            v = A_inv @ xd_d
            qd_r = J.T @ v + qd_r
        xo_dot = J @ qd_r - cfg.beta * (J @ (J.T @ dxo))
        ak_dot = self.Gk @ (self.arm.kinematic_regressor(meas.q, meas.qd).T @ (dx - dxo))
        J_dot = self.arm.jacobian_dot(meas.q, meas.qd, a_k) + self.arm.jacobian(meas.q, ak_dot)
        qdd_r = -cfg.gamma * (J_dot.T @ err + J.T @ (xo_dot - xd_d))
        if ff:
            A_dot = J_dot @ J.T + J @ J_dot.T
            qdd_r = qdd_r + J_dot.T @ v - J.T @ (A_inv @ (A_dot @ v)) + J.T @ (A_inv @ xdd_d)
        out = np.zeros(L.size)
        L.set(out, "x_o", xo_dot)
        L.set(out, "a_k", ak_dot)
        sig = self._dynamic_part(z, meas, qd_r, qdd_r, None, out)
        sig.update(dx=dx, dxo=dxo, J=J)
        return out, sig


class ObserverTracker(ObserverRegulator):
    """Tracking: adds the feedforward ``J^T (J J^T)^-1 xd_d`` to ``qd_r``.

    With a motionless target the feedforward branch is skipped, so the
    emitted commands equal the regulator's bit for bit.
    """

    kind = "observer_tracker"
    tracking = True
