"""Two-rate fixed-step simulation of the servoed arm under an outer controller.

The plant and the servo run at ``dt_inner`` inside a compiled kernel; the
outer controller is stepped every ``dt_outer / dt_inner`` inner ticks and its
command is held in between. One log row is written per outer tick: the
measurement and controller state at ``t`` together with the command sent to
the servo for ``[t, t + dt_outer)``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .controllers import (ControllerError, EstimateState, Measurement, OuterConfig,
                          make_controller)
from .controllers.lyapunov import TOL_C, PlantTruth, lyapunov_value
from .model import Arm, PlantModel, forward_kinematics
from .servo import InnerGains

FLAG_PROJECTION = 1
FLAG_LYAPUNOV = 2


class NumericalDivergence(RuntimeError):
    pass


class ScenarioError(RuntimeError):
    """A controller error raised mid-run; carries the time and the partial log."""

    def __init__(self, message, t, cause, log=None):
        super().__init__(message)
        self.t = t
        self.cause = cause
        self.log = log


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one run."""

    name: str = "scenario"
    plant: PlantModel = field(default_factory=PlantModel)
    servo: InnerGains = field(default_factory=lambda: InnerGains("pi_velocity", 30.0, 15.0))
    controller: str = "filter_regulator"
    outer: OuterConfig = field(default_factory=OuterConfig)
    initial: EstimateState = field(default_factory=EstimateState)
    target: object = None
    dt_inner: float = 0.5e-3
    dt_outer: float = 20e-3
    duration: float = 10.0
    q0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    qd0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    substeps: int = 1
    controller_friction: bool = False
    monitor: bool = True
    ceiling: float = 1e6
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.q0 = np.asarray(self.q0, dtype=float).reshape(3)
        self.qd0 = np.asarray(self.qd0, dtype=float).reshape(3)
        self.validate()

    @property
    def ratio(self) -> int:
        return int(round(self.dt_outer / self.dt_inner))

    @property
    def n_outer(self) -> int:
        return int(round(self.duration / self.dt_outer))

    def validate(self):
        if not (self.dt_inner > 0 and self.dt_outer > 0):
            raise ValueError("dt_inner and dt_outer must be positive")
        r = self.dt_outer / self.dt_inner
        if abs(r - round(r)) > 1e-9 * r or round(r) < 1:
            raise ValueError(f"dt_outer ({self.dt_outer}) must be an integer multiple of dt_inner ({self.dt_inner})")
        if self.duration < 0:
            raise ValueError("duration must be nonnegative")
        n = self.duration / self.dt_outer
        if abs(n - round(n)) > 1e-9 * max(n, 1.0):
            raise ValueError(f"duration ({self.duration}) must be a multiple of dt_outer ({self.dt_outer})")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.ceiling <= 0:
            raise ValueError("ceiling must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")

    def arm(self) -> Arm:
        return Arm(tool_angle=self.plant.tool_angle, base_height=self.plant.base_height,
                   gravity=self.plant.gravity, friction=self.controller_friction)


def _labels(stem, n=3):
    return [f"{stem}{i + 1}" for i in range(n)]


COLUMNS = (["t"] + _labels("q") + _labels("qd") + _labels("x") + _labels("err")
           + _labels("qc") + _labels("qcd") + _labels("qr") + _labels("qc_qr") + _labels("u")
           + _labels("w") + _labels("wI") + _labels("wP") + ["ad_norm", "ak_err", "V", "flags"])


@dataclass
class TrajectoryLog:
    """Rows of logged quantities, one per outer tick; ``err`` is task or joint error."""

    columns: list
    data: np.ndarray
    error_space: str = "task"
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.data.shape[0]

    def col(self, name) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def block(self, stem, n=3) -> np.ndarray:
        return np.column_stack([self.col(c) for c in _labels(stem, n)])

    @property
    def t(self) -> np.ndarray:
        return self.col("t")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.data:
            fields = []
            for name, v in zip(self.columns, row):
                fields.append(str(int(v)) if name == "flags" else "%.9g" % v)
            buf.write(",".join(fields) + "\n")
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())


def _plant_arrays(cfg: ScenarioConfig):
    m = cfg.plant
    flexible = m.flexible
    a = m.dynamic_params(rotor=not flexible, friction=False)
    coulomb = m.coulomb if m.coulomb is not None else np.zeros(3)
    stiffness = m.stiffness if flexible else np.ones(3)
    return dict(a=np.ascontiguousarray(a), motor=m.motor_gain, coulomb=coulomb, stiffness=stiffness,
                rotor_inertia=m.rotor_inertia, rotor_damping=m.rotor_damping, gravity=float(m.gravity),
                flexible=flexible)


def run_scenario(cfg: ScenarioConfig, controller=None) -> TrajectoryLog:
    """Simulate ``cfg`` and return its log.

    Controller failures are re-raised as :class:`ScenarioError` with the time
    and the partial log; plant blow-up raises :class:`NumericalDivergence`.
    """
    cfg.validate()
    if cfg.target is None:
        raise ValueError("scenario has no target")
    arm = cfg.arm()
    ctrl = controller or make_controller(cfg.controller, cfg.outer, cfg.initial, arm)
    if ctrl.servo_mode != cfg.servo.mode:
        raise ValueError(f"controller {ctrl.kind} expects a {ctrl.servo_mode} servo, got {cfg.servo.mode}")
    if ctrl.servo_reads_rotor and not cfg.plant.flexible:
        raise ValueError("the flexible-joint controller needs a flexible plant")
    P = _plant_arrays(cfg)
    truth = PlantTruth.from_model(cfg.plant, cfg.servo, friction=cfg.controller_friction) if cfg.monitor else None
    mode, kp, ki, kd = cfg.servo.kernel_args()
    true_ak = cfg.plant.kinematic_params()
    rng = np.random.default_rng(cfg.seed)

    if P["flexible"]:
        x = np.concatenate([cfg.q0, cfg.qd0, cfg.q0, np.zeros(3)])
    else:
        x = np.concatenate([cfg.q0, cfg.qd0])
    integral = np.zeros(3)
    prev_err = np.zeros(3)
    have_prev = False
    u = np.zeros(3)
    tol_v = TOL_C * cfg.dt_inner ** 2

    n_outer = cfg.n_outer
    rows = np.empty((n_outer + 1, len(COLUMNS)))
    task_err = ctrl.kind in ("filter_regulator", "observer_regulator", "observer_tracker") or (
        getattr(ctrl.config, "reference", "joint") != "joint" and ctrl.kind in ("pid_outer", "kinematic"))
    error_space = "task" if task_err else "joint"
    nan3 = np.full(3, np.nan)
    V_prev = np.nan
    log = TrajectoryLog(list(COLUMNS), rows[:0], error_space)

    for k in range(n_outer + 1):
        t = k * cfg.dt_outer
        q, qd = x[0:3].copy(), x[3:6].copy()
        if cfg.noise_std > 0:
            q = q + rng.normal(0.0, cfg.noise_std, 3)
            qd = qd + rng.normal(0.0, cfg.noise_std, 3)
        x_meas = forward_kinematics(q, true_ak, cfg.plant.base_height, cfg.plant.tool_angle)
        meas = Measurement(t, q, qd, x_meas)
        try:
            if ctrl.z is None:
                ctrl.reset(meas, cfg.target)
            sig = ctrl.signals(meas, cfg.target)
            V = lyapunov_value(ctrl, meas, sig, truth) if truth is not None else np.nan
            names = ctrl.layout.slices
            est = ctrl.estimates()
            q_r = ctrl.get("q_r")
            gap = (ctrl.get("q_c") if "q_c" in names else q_r) - q_r
            flags = 0
            cfgo = ctrl.config
            for nm in ctrl.projected:
                if nm in names:
                    v = ctrl.get(nm)
                    if np.any(v <= cfgo.proj_lo) or np.any(v >= cfgo.proj_hi):
                        flags |= FLAG_PROJECTION
            last = k == n_outer
            cmd = ctrl.preview(meas, cfg.target, cfg.dt_outer) if last else ctrl.step(meas, cfg.target, cfg.dt_outer)
        except ControllerError as exc:
            log.data = rows[:k]
            raise ScenarioError(f"t={t:.3f} s: {type(exc).__name__}: {exc}", t, exc, log) from exc

        pos_d = cfg.target(t)[0]
        err = (x_meas - pos_d) if error_space == "task" else (q - pos_d)
        if np.isfinite(V) and np.isfinite(V_prev) and V > V_prev + tol_v:
            flags |= FLAG_LYAPUNOV
        V_prev = V
        rows[k] = np.concatenate([
            [t], q, qd, x_meas, err, cmd.q_c, cmd.qd_c, q_r, gap, u,
            est.w if "w" in names else nan3,
            est.w_I if "w_I" in names else nan3,
            est.w_P if "w_P" in names else nan3,
            [np.linalg.norm(est.a_d) if "a_d" in names else np.nan,
             np.linalg.norm(est.a_k - true_ak) if "a_k" in names else np.nan,
             V, flags],
        ])
        if last:
            break
        x, u, integral, prev_err, have_prev, ok = _kernels.advance_inner(
            x, P["flexible"], cfg.ratio, cfg.substeps, cfg.dt_inner,
            mode, kp, ki, kd, cmd.q_c, cmd.qd_c, integral, prev_err, have_prev,
            P["a"], P["motor"], P["coulomb"], P["stiffness"], P["rotor_inertia"], P["rotor_damping"],
            P["gravity"], cfg.ceiling)
        if not ok:
            log.data = rows[:k + 1]
            exc = NumericalDivergence(
                f"plant state left the ceiling {cfg.ceiling:g} between t={t:.3f} s and "
                f"t={t + cfg.dt_outer:.3f} s (max |state| = {np.nanmax(np.abs(x)):.3e})")
            exc.log = log
            exc.t = t
            raise exc
    log.data = rows
    log.meta = {"name": cfg.name, "controller": ctrl.kind}
    return log


METRICS = ("final", "rms", "max")


def compare_runs(a: TrajectoryLog, b: TrajectoryLog | None, column: str = "err", metric: str = "rms",
                 window: float | None = None) -> float:
    """Metric of log ``a`` minus that of log ``b`` on the selected column(s).

    ``column`` is a single column or a stem (``"err"`` gives the row norm of
    ``err1..3``). ``window`` restricts rms/max to the trailing seconds. With
    ``b=None`` the metric of ``a`` alone is returned.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")

    def value(log):
        if column in log.columns:
            sig = np.abs(log.col(column))
        else:
            sig = np.linalg.norm(log.block(column), axis=1)
        t = log.t
        if metric == "final":
            return float(sig[-1])
        mask = np.ones_like(t, dtype=bool) if window is None else t >= t[-1] - window - 1e-12
        sel = sig[mask]
        return float(np.sqrt(np.mean(sel ** 2))) if metric == "rms" else float(np.max(sel))

    if b is None:
        return value(a)
    if len(a) != len(b) or not np.array_equal(a.t, b.t):
        raise ValueError("logs are on different time grids")
    return value(a) - value(b)
