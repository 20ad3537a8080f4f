"""Joint-space tracking behind a PI velocity servo.

``JointDirect`` is the outer-loop form of the Slotine-Li controller,
``Composite`` adds a filtered torque prediction error to its adaptation
(optionally with bounded-gain forgetting), and ``FlexibleJoint`` binds the
same law to a servo that reads rotor-side signals.
"""

from __future__ import annotations

import numpy as np

from .base import (EstimateState, GainBoundViolated, Layout, OuterConfig,
                   ScaledCompensation)


class JointDirect(ScaledCompensation):
    """qd_r = qd_d - alpha_bar (q - q_d); no kinematic adaptation."""

    kind = "joint_direct"

    def _layout(self):
        n = self.arm.n
        return Layout(w=n, a_d=self.arm.n_dyn, w_I=n, q_r=n, q_c=n)

    def _initial_state(self, meas, target):
        e = self.initial
        return self.layout.pack(w=e.w, a_d=e.a_d, w_I=e.w_I, q_r=meas.q, q_c=meas.q)

    def reference_velocity(self, t, meas, target):
        q_d, qd_d, qdd_d = target(t)
        ab = self.config.alpha_bar
        qd_r = qd_d - ab * (meas.q - q_d)
        qdd_r = qdd_d - ab * (meas.qd - qd_d)
        return qd_r, qdd_r, meas.q - q_d

    def rates(self, t, z, meas, target):
        qd_r, qdd_r, e = self.reference_velocity(t, meas, target)
        out = np.zeros(self.layout.size)
        sig = self._dynamic_part(z, meas, qd_r, qdd_r, None, out)
        sig["dq"] = e
        return out, sig


class FlexibleJoint(JointDirect):
    """Same command law; the servo closes its loop on rotor position and velocity."""

    kind = "flexible_joint"
    servo_reads_rotor = True


class Composite(JointDirect):
    """Composite adaptation with the prediction error ``e_f``.

    The filtered regressor ``Y_f`` of ``Y_d(q, qd, qd, qdd)`` is realized
    without acceleration: with ``Y_m`` the regressor of ``M(q) qd`` and
    ``Y_r`` that of ``-C^T qd + B qd + g``,

        Y_f = lambda_f (Y_m - W_m) + W_r,
        dW_m/dt = lambda_f (Y_m - W_m),  W_m(0) = Y_m(0),
        dW_r/dt = lambda_f (Y_r - W_r),  W_r(0) = 0.

    ``u_f`` and ``h_f`` filter ``-(qd - qd_c)`` and ``q - q_c`` using the
    command actually held at the servo.
    """

    kind = "composite"

    def __init__(self, config: OuterConfig, initial: EstimateState | None = None, arm=None):
        super().__init__(config, initial, arm)
        if config.lambda_f <= 0:
            raise ValueError("lambda_f must be positive")
        n, nd = self.arm.n, self.arm.n_dyn
        bar = lambda name, fallback: (config.diag(name, n) if getattr(config, name) is not None else fallback.copy())
        self.Lam_bar = bar("Lambda_bar", self.Lam)
        self.LamI_bar = bar("Lambda_I_bar", self.LamI)
        self.Gd_bar = config.matrix("Gamma_d_bar", nd) if config.Gamma_d_bar is not None else self.Gd.copy()
        if config.cf:
            if np.any(self.Lam > self.Lam_bar) or np.any(self.LamI > self.LamI_bar):
                raise GainBoundViolated("initial adaptation gains exceed their bounds")
            if np.linalg.eigvalsh(self.Gd_bar - self.Gd).min() < -1e-12:
                raise GainBoundViolated("initial Gamma_d exceeds its bound")
            self.Gd_bar_inv = np.linalg.inv(self.Gd_bar)

    def _layout(self):
        n, nd = self.arm.n, self.arm.n_dyn
        shapes = dict(w=n, a_d=nd, w_I=n, q_r=n, q_c=n, W_m=(n, nd), W_r=(n, nd), u_f=n, h_f=n)
        if self.config.cf:
            shapes.update(Lam=n, Gd=(nd, nd), LamI=n)
        return Layout(**shapes)

    def _initial_state(self, meas, target):
        e = self.initial
        Ym, _ = self.arm.filtered_regressor_parts(meas.q, meas.qd)
        vals = dict(w=e.w, a_d=e.a_d, w_I=e.w_I, q_r=meas.q, q_c=meas.q, W_m=Ym)
        if self.config.cf:
            vals.update(Lam=self.Lam, Gd=self.Gd, LamI=self.LamI)
        return self.layout.pack(**vals)

    def gains(self, z=None):
        """Current (Lambda, Gamma_d, Lambda_I); constant unless CF mode is on."""
        if not self.config.cf:
            return self.Lam, self.Gd, self.LamI
        z = self.z if z is None else z
        L = self.layout
        return L.get(z, "Lam"), L.get(z, "Gd"), L.get(z, "LamI")

    def rates(self, t, z, meas, target):
        L = self.layout
        cfg = self.config
        lf, g0 = cfg.lambda_f, cfg.gamma0
        qd_r, qdd_r, e = self.reference_velocity(t, meas, target)
        a_d, w, w_I = L.get(z, "a_d"), L.get(z, "w"), L.get(z, "w_I")
        q_r, q_c = L.get(z, "q_r"), L.get(z, "q_c")
        W_m, W_r = L.get(z, "W_m"), L.get(z, "W_r")
        u_f, h_f = L.get(z, "u_f"), L.get(z, "h_f")
        Lam, Gd, LamI = self.gains(z)

        s = meas.qd - qd_r
        Yd = self.arm.dynamic_regressor(meas.q, meas.qd, qd_r, qdd_r)
        comp = Yd @ a_d
        qd_c = qd_r + w_I * (q_r - q_c) + w * comp

        Ym, Yr = self.arm.filtered_regressor_parts(meas.q, meas.qd)
        Y_f = lf * (Ym - W_m) + W_r
        pred = Y_f @ a_d
        e_f = w * pred + h_f * w_I - u_f
        if self.held is not None:
            held_qc, held_qdc = self.held.q_c, self.held.qd_c
        else:
            held_qc, held_qdc = q_c, qd_c

        out = np.zeros(L.size)
        L.set(out, "w", -Lam * (comp * s + g0 * pred * e_f))
        L.set(out, "a_d", -Gd @ (Yd.T @ s + g0 * (Y_f.T @ e_f)))
        L.set(out, "w_I", LamI * ((q_c - q_r) * s - g0 * h_f * e_f))
        L.set(out, "q_r", qd_r)
        L.set(out, "q_c", qd_c)
        L.set(out, "W_m", lf * (Ym - W_m))
        L.set(out, "W_r", lf * (Yr - W_r))
        L.set(out, "u_f", lf * (-(meas.qd - held_qdc) - u_f))
        L.set(out, "h_f", lf * ((meas.q - held_qc) - h_f))
        if cfg.cf:
            L.set(out, "Lam", cfg.lambda1 * (Lam - Lam * Lam / self.Lam_bar) - g0 * (Lam * pred) ** 2)
            GY = Gd @ Y_f.T
            L.set(out, "Gd", cfg.lambda2 * (Gd - Gd @ self.Gd_bar_inv @ Gd) - g0 * (GY @ GY.T))
            L.set(out, "LamI", cfg.lambda3 * (LamI - LamI * LamI / self.LamI_bar) - g0 * (LamI * h_f) ** 2)
        sig = {"qd_c": qd_c, "qd_r": qd_r, "qdd_r": qdd_r, "s": s, "comp": comp, "Yd": Yd,
               "dq": e, "Y_f": Y_f, "e_f": e_f}
        return out, sig

    def _after_step(self):
        if not self.config.cf:
            return
        L = self.layout
        Gd = L.get(self.z, "Gd")
        L.set(self.z, "Gd", 0.5 * (Gd + Gd.T))
        tol = 1e-9
        for name, bound in (("Lam", self.Lam_bar), ("LamI", self.LamI_bar)):
            v = L.get(self.z, name)
            if np.any(v <= 0) or np.any(v > bound * (1 + tol)):
                raise GainBoundViolated(f"{name} left (0, bound]: {v}")
        Gd = L.get(self.z, "Gd")
        if np.linalg.eigvalsh(Gd).min() <= 0:
            raise GainBoundViolated("Gamma_d lost positive definiteness")
        excess = np.linalg.eigvalsh(Gd - self.Gd_bar).max()
        if excess > tol * np.abs(self.Gd_bar).max():
            raise GainBoundViolated(f"Gamma_d exceeds its bound by {excess:.3e}")
