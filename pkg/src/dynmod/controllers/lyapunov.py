"""Runtime monitors on the Lyapunov candidates of each controller.

The candidates need the true plant, so they are evaluated by the simulator
only. For a flexible plant the slow (quasi-rigid) model is used: the rotor
terms are scaled by ``K_s* = K_s (K_s + K K_I)^-1`` and the effective servo
gain becomes ``K_s* K K_P``. With ``q_r(0) = q(0)`` the offset
``delta_0`` vanishes and ``int s + delta_0 = q - q_r``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import PlantModel, mass_matrix
from ..servo import PI_VELOCITY, InnerGains

# Per-step allowance for the monitor: V(t_k+1) <= V(t_k) + C * dt_inner**2.
# Calibrated once on the bundled presets and frozen.
TOL_C = 2.0e3


@dataclass
class PlantTruth:
    """True values the candidates compare the estimates against."""

    a_k: np.ndarray
    a_d: np.ndarray
    motor: np.ndarray
    kp: np.ndarray
    ki: np.ndarray
    kd: np.ndarray | None
    damping: np.ndarray
    rigid_a: np.ndarray

    @classmethod
    def from_model(cls, model: PlantModel, gains: InnerGains, friction: bool = False) -> "PlantTruth":
        motor = model.motor_gain.copy()
        a = model.dynamic_params(rotor=not model.flexible, friction=friction)
        damping = model.damping.copy()
        if model.flexible:
            ks_star = model.stiffness / (model.stiffness + motor * gains.ki)
            # rotor inertia enters the slow model scaled by K_s*
            a[0] += ks_star[0] * model.rotor_inertia[0]
            a[6] += ks_star[1] * model.rotor_inertia[1]
            a[8] += ks_star[2] * model.rotor_inertia[2]
            damping = damping + ks_star * model.rotor_damping
            a[12:15] = damping
            motor = ks_star * motor
        return cls(a_k=model.kinematic_params(), a_d=a, motor=motor, kp=gains.kp, ki=gains.ki,
                   kd=gains.kd, damping=damping, rigid_a=a[:15].copy())

    def mass(self, q) -> np.ndarray:
        return mass_matrix(q, self.rigid_a)

    def scales(self, mode: str) -> dict:
        """True w, w_I (and w_P) for the servo mode, plus the effective gains."""
        k = self.motor
        if mode == PI_VELOCITY:
            kst = k * self.kp
            return {"K*": kst, "w": 1.0 / kst, "w_I": self.ki / self.kp, "KKI": k * self.ki}
        kbar = k * self.kd
        return {"K*": kbar, "w": 1.0 / kbar, "w_I": self.ki / self.kd, "w_P": self.kp / self.kd,
                "KKI": k * self.ki}


def _quad_inv(delta, G):
    return 0.5 * float(delta @ np.linalg.solve(G, delta))


def lyapunov_terms(ctrl, meas, sig: dict, truth: PlantTruth) -> dict | None:
    """Individual terms of the active candidate, or None when none applies."""
    kind = ctrl.kind
    if kind in ("kinematic",) or (kind == "pid_outer" and ctrl.config.reference == "cartesian"):
        return None
    L = ctrl.layout
    z = ctrl.z
    cfg = ctrl.config
    q, qd = np.asarray(meas.q, dtype=float), np.asarray(meas.qd, dtype=float)
    M = truth.mass(q)
    sc = truth.scales(ctrl.servo_mode)
    Kst = sc["K*"]
    d_ad = L.get(z, "a_d") - truth.a_d
    d_w = L.get(z, "w") - sc["w"]
    d_wI = L.get(z, "w_I") - sc["w_I"]
    e = q - L.get(z, "q_r")
    terms = {}

    if kind == "pid_outer":
        kc, kd, kp, ki = ctrl.Kc, truth.kd, truth.kp, truth.ki
        k, b = truth.motor, truth.damping
        xi = qd - sig["qd_rs"]
        E = q - L.get(z, "q_rs")
        calM = (kd + b / k) * kc + kp - ki / kc
        terms["xi_M_xi"] = 0.5 * float(xi @ M @ xi)
        terms["int_xi"] = 0.5 * float(E @ (k * ki / kc * E))
        terms["int_s"] = 0.5 * float(e @ ((k * calM + k * kc * kd + kc * b) * e))
        terms["dw"] = 0.5 * float(d_w @ (Kst / ctrl.Lam * d_w))
        terms["dad"] = _quad_inv(d_ad, ctrl.Gd)
        d_wP = L.get(z, "w_P") - sc["w_P"]
        terms["dwP"] = 0.5 * float(d_wP @ (Kst / ctrl.LamP * d_wP))
        terms["dwI"] = 0.5 * float(d_wI @ (Kst / ctrl.LamI * d_wI))
    else:
        s = qd - sig["qd_r"]
        if kind == "composite":
            Lam, Gd, LamI = ctrl.gains()
        else:
            Lam, Gd, LamI = ctrl.Lam, ctrl.Gd, ctrl.LamI
        terms["s_M_s"] = 0.5 * float(s @ M @ s)
        terms["int_s"] = 0.5 * float(e @ (sc["KKI"] * e))
        terms["dw"] = 0.5 * float(d_w @ (Kst / Lam * d_w))
        terms["dad"] = _quad_inv(d_ad, Gd)
        terms["dwI"] = 0.5 * float(d_wI @ (Kst / LamI * d_wI))

    if "y" in L.slices:
        y = L.get(z, "y")
        dx = sig["dx"]
        d_ak = L.get(z, "a_k") - truth.a_k
        K1, K2 = ctrl.K1, ctrl.K2
        terms["kinematic"] = cfg.alpha * (0.5 * float(dx @ dx) + 0.5 * float(y @ (K2 / K1 * y))
                                          + _quad_inv(d_ak, ctrl.Gk))
    return terms


def lyapunov_value(ctrl, meas, sig: dict, truth: PlantTruth) -> float:
    """Value of the candidate for the active controller; NaN when none applies."""
    terms = lyapunov_terms(ctrl, meas, sig, truth)
    if terms is None:
        return float("nan")
    return float(sum(terms.values()))
