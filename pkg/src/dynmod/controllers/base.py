"""Shared machinery for the outer-loop command generators.

Every controller is a single-owner state machine. At an outer tick it reads
the measurement, emits the current ``(q_c, qd_c)`` and then advances its
internal ODEs across the outer period by classical RK4 with the measurement
and the emitted command held (zero-order hold).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..model import Arm
from ..servo import PI_VELOCITY, ServoCommand


class ControllerError(RuntimeError):
    """Base class for outer-loop failures."""


class SingularJacobianEstimate(ControllerError):
    pass


class NonFiniteState(ControllerError):
    pass


class GainConditionViolated(ValueError):
    pass


class GainBoundViolated(ControllerError):
    pass


@dataclass
class Measurement:
    t: float
    q: np.ndarray
    qd: np.ndarray
    x: np.ndarray | None = None


def _vec(v, n=3):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape == (1,):
        arr = np.repeat(arr, n)
    return arr


def _mat(v, n):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0 or arr.size == 1:
        return float(arr) * np.eye(n)
    if arr.ndim == 1:
        return np.diag(arr)
    return arr


@dataclass
class EstimateState:
    """Adaptive estimates. Dimensions follow the controller's arm."""

    a_k: np.ndarray = field(default_factory=lambda: np.array([3.0, 5.0, 2.0]))
    a_d: np.ndarray | None = None
    w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w_I: np.ndarray = field(default_factory=lambda: np.ones(3))
    w_P: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        self.a_k = _vec(self.a_k)
        self.w = _vec(self.w)
        self.w_I = _vec(self.w_I)
        self.w_P = _vec(self.w_P)
        if self.a_d is not None:
            self.a_d = np.asarray(self.a_d, dtype=float).reshape(-1)


@dataclass
class OuterConfig:
    """Design constants of the outer loop.

    Matrix-valued gains accept a scalar (times identity), a diagonal, or a
    full matrix. Only the gains used by a given controller are read.
    """

    alpha: float = 2.0
    beta: float = 1.0
    gamma: float = 1.0
    alpha_bar: float = 2.0
    gamma0: float = 0.3
    lambda_f: float = 1.0
    lambda1: float = 0.1
    lambda2: float = 0.1
    lambda3: float = 0.1
    K1: object = 60.0
    K2: object = 2.0
    Kc: object = 0.8
    Lambda: object = 0.001
    Lambda_P: object = 100.0
    Lambda_I: object = 100.0
    Gamma_k: object = 20.0
    Gamma_d: object = 0.006
    Lambda_bar: object = None
    Gamma_d_bar: object = None
    Lambda_I_bar: object = None
    cf: bool = False
    proj_lo: float = 0.05
    proj_hi: float = 50.0
    sigma_min: float = 1e-3
    rate_limit: float | None = None
    substeps: int = 10
    servo_gain_estimates: dict | None = None
    reference: str = "joint"
    filter_start: str = "steady"

    def diag(self, name, n=3) -> np.ndarray:
        return np.diag(_mat(getattr(self, name), n)).copy()

    def matrix(self, name, n) -> np.ndarray:
        return _mat(getattr(self, name), n)


def project(value, lo, hi) -> np.ndarray:
    """Componentwise clamp of an estimate into ``[lo, hi]``."""
    return np.clip(value, lo, hi)


def project_rate(value, rate, lo, hi) -> np.ndarray:
    """Zero the adaptation rate on an active bound when it points outward."""
    rate = np.array(rate, dtype=float, copy=True)
    rate[(value <= lo) & (rate < 0.0)] = 0.0
    rate[(value >= hi) & (rate > 0.0)] = 0.0
    return rate


def sampled(target, t):
    """``target`` frozen at its value at time ``t`` (zero-order hold)."""
    ref = tuple(np.array(v, dtype=float) for v in target(t))
    return lambda _t: ref


class Layout:
    """Named slices of a flat state vector."""

    def __init__(self, **shapes):
        self.shapes = {}
        self.slices = {}
        start = 0
        for name, shape in shapes.items():
            shape = (shape,) if isinstance(shape, int) else tuple(shape)
            size = int(np.prod(shape))
            self.shapes[name] = shape
            self.slices[name] = slice(start, start + size)
            start += size
        self.size = start

    def get(self, z, name):
        return z[self.slices[name]].reshape(self.shapes[name])

    def set(self, z, name, value):
        z[self.slices[name]] = np.asarray(value, dtype=float).reshape(-1)

    def pack(self, **values):
        z = np.zeros(self.size)
        for name, value in values.items():
            self.set(z, name, value)
        return z


class OuterController:
    """Base class: ZOH stepping, RK4 sub-stepping, projection, guards."""

    kind = "base"
    servo_mode = PI_VELOCITY
    servo_reads_rotor = False
    projected: tuple = ("w_I",)

    def __init__(self, config: OuterConfig, initial: EstimateState | None = None, arm: Arm | None = None):
        self.config = config
        self.arm = arm or Arm()
        self.initial = initial or EstimateState()
        if self.initial.a_d is None:
            self.initial.a_d = np.zeros(self.arm.n_dyn)
        if self.initial.a_d.shape != (self.arm.n_dyn,):
            raise ValueError(f"a_d estimate must have {self.arm.n_dyn} entries, got {self.initial.a_d.shape}")
        if config.substeps < 1:
            raise ValueError("substeps must be >= 1")
        self.layout = self._layout()
        self.z: np.ndarray | None = None
        self.held: ServoCommand | None = None
        self.last_signals: dict | None = None
        self.t = 0.0

    # -- to be provided by subclasses
    def _layout(self) -> Layout:
        raise NotImplementedError

    def _initial_state(self, meas: Measurement, target) -> np.ndarray:
        raise NotImplementedError

    def rates(self, t, z, meas: Measurement, target):
        """Return ``(dz, sig)`` for state ``z`` at time ``t``.

        ``sig`` maps signal names to values; it must contain ``qd_c`` and
        ``qd_r`` and usually ``s``, ``qdd_r`` and the compensation term.
        """
        raise NotImplementedError

    # -- common
    def reset(self, meas: Measurement, target):
        self.z = self._initial_state(meas, target)
        self.t = meas.t
        self._project(self.z)

    def get(self, name):
        return self.layout.get(self.z, name).copy()

    def copy(self) -> "OuterController":
        return copy.deepcopy(self)

    def _project(self, z):
        cfg = self.config
        for name in self.projected:
            if name in self.layout.slices:
                sl = self.layout.slices[name]
                z[sl] = project(z[sl], cfg.proj_lo, cfg.proj_hi)

    def _project_rates(self, z, dz):
        cfg = self.config
        for name in self.projected:
            if name in self.layout.slices:
                sl = self.layout.slices[name]
                r = dz[sl]
                if cfg.rate_limit is not None:
                    r = np.clip(r, -cfg.rate_limit, cfg.rate_limit)
                dz[sl] = project_rate(z[sl], r, cfg.proj_lo, cfg.proj_hi)
        return dz

    def _checked_rates(self, t, z, meas, target):
        self._check_state(z)
        with np.errstate(all="ignore"):
            try:
                dz, sig = self.rates(t, z, meas, target)
            except np.linalg.LinAlgError as exc:
                raise NonFiniteState(f"linear algebra failed on the controller state: {exc}") from exc
        if not np.all(np.isfinite(dz)):
            raise NonFiniteState(f"non-finite controller rates at t={t:.4f}")
        return self._project_rates(z, dz), sig

    def signals(self, meas: Measurement, target) -> dict:
        """Derived signals (references, sliding vector, rates) at the current state."""
        dz, sig = self._checked_rates(meas.t, self.z, meas, target)
        sig = dict(sig)
        sig["dz"] = dz
        return sig

    def _emit(self, z, sig) -> ServoCommand:
        return self._command(self.layout.get(z, "q_c"), sig["qd_c"])

    @staticmethod
    def _command(q_c, qd_c) -> ServoCommand:
        if not (np.all(np.isfinite(q_c)) and np.all(np.isfinite(qd_c))):
            raise NonFiniteState("non-finite servo command")
        return ServoCommand(np.array(q_c, dtype=float), np.array(qd_c, dtype=float))

    def check_jacobian(self, J):
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] < self.config.sigma_min:
            raise SingularJacobianEstimate(
                f"smallest singular value of the Jacobian estimate is {sv[-1]:.3e} "
                f"(floor {self.config.sigma_min:.1e})")

    def step(self, meas: Measurement, target, dt: float) -> ServoCommand:
        """Advance internal state by ``dt`` and emit the command for the coming interval.

        The ODEs are integrated over ``[t, t + dt]`` with the measurement and
        the reference sampled at ``t`` and held, and the command is read from
        the advanced state. Emitting from the start-of-interval state instead
        adds a full outer period of delay, which destabilises the 20 ms loops
        at the nominal gains.
        """
        if self.z is None:
            self.reset(meas, target)
        target = sampled(target, meas.t)
        t1 = meas.t + dt
        self.z = self.integrate(self.z, meas, target, meas.t, dt, self.config.substeps)
        self.t = t1
        self._check_state()
        self._after_step()
        _, sig = self._checked_rates(t1, self.z, meas, target)
        cmd = self._emit(self.z, sig)
        self.held = cmd
        self.last_signals = sig
        return cmd

    def preview(self, meas: Measurement, target, dt: float) -> ServoCommand:
        """The command ``step`` would return, leaving this controller untouched."""
        return self.copy().step(meas, target, dt)

    def _after_step(self):
        pass

    def integrate(self, z, meas, target, t0, dt, substeps):
        h = dt / substeps
        f = lambda t, y: self._checked_rates(t, y, meas, target)[0]
        t = t0
        for _ in range(substeps):
            k1 = f(t, z)
            k2 = f(t + 0.5 * h, z + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, z + 0.5 * h * k2)
            k4 = f(t + h, z + h * k3)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            self._project(z)
            t += h
        return z

    def _check_state(self, z=None):
        z = self.z if z is None else z
        if not np.all(np.isfinite(z)):
            bad = [n for n, sl in self.layout.slices.items() if not np.all(np.isfinite(z[sl]))]
            raise NonFiniteState(f"non-finite controller state in {', '.join(bad)}")

    def estimates(self) -> EstimateState:
        """Snapshot of the current estimates (absent ones keep initial values)."""
        names = self.layout.slices
        pick = lambda n: self.get(n) if n in names else getattr(self.initial, n)
        return EstimateState(a_k=pick("a_k"), a_d=pick("a_d"), w=pick("w"), w_I=pick("w_I"), w_P=pick("w_P"))

    def reference(self) -> np.ndarray:
        return self.get("q_r")


class ScaledCompensation(OuterController):
    """Command ODE with adaptively scaled dynamic compensation (PI servo).

    Subclasses supply ``qd_r`` and ``qdd_r``; this class adds the laws for
    ``w``, ``a_d`` and ``w_I`` driven by ``s = qd - qd_r``.
    """

    def __init__(self, config: OuterConfig, initial: EstimateState | None = None, arm=None):
        super().__init__(config, initial, arm)
        n = self.arm.n
        self.Lam = config.diag("Lambda", n)
        self.Gd = config.matrix("Gamma_d", self.arm.n_dyn)
        self.LamI = config.diag("Lambda_I", n)

    def _measured_x(self, meas):
        if meas.x is None:
            raise ValueError(f"{self.kind} needs the measured task position")
        return np.asarray(meas.x, dtype=float)

    def _dynamic_part(self, z, meas, qd_r, qdd_r, comp_extra, out):
        """Fill the command, w, a_d, w_I, q_r and q_c rates into ``out``."""
        L = self.layout
        a_d, w, w_I = L.get(z, "a_d"), L.get(z, "w"), L.get(z, "w_I")
        q_r, q_c = L.get(z, "q_r"), L.get(z, "q_c")
        s = meas.qd - qd_r
        Yd = self.arm.dynamic_regressor(meas.q, meas.qd, qd_r, qdd_r)
        comp = Yd @ a_d
        if comp_extra is not None:
            comp = comp + comp_extra
        qd_c = qd_r + w_I * (q_r - q_c) + w * comp
        L.set(out, "w", -self.Lam * comp * s)
        L.set(out, "a_d", -self.Gd @ (Yd.T @ s))
        L.set(out, "w_I", self.LamI * (q_c - q_r) * s)
        L.set(out, "q_r", qd_r)
        L.set(out, "q_c", qd_c)
        return {"qd_c": qd_c, "qd_r": qd_r, "qdd_r": qdd_r, "s": s, "comp": comp, "Yd": Yd}
