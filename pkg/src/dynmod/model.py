"""Plant model of the 3-DOF arm: kinematics, rigid/flexible dynamics, regressors.

Geometry: joint 1 yaws about the vertical axis; joints 2 and 3 pitch about
parallel horizontal axes; the tool is rigidly fixed to link 3 at a known
angle ``tool_angle`` about the joint-3 axis. Gravity acts along -Z0.

Kinematic parameters ``a_k = [l2, l3, lE]``. The base height ``l1`` and the
tool angle are treated as known structure.

Dynamic base parameters (15), with body 3 meaning link 3 plus the tool
expressed in the link-3 frame (x along the link, z along the joint axis)
and inertia tensors taken about each body's joint origin::

    a[0]  I1_yaw + Dr1 + (Ixx2 + Iyy2 + Ixx3 + Iyy3 + l2^2 m3) / 2
    a[1]  (Iyy2 - Ixx2 + l2^2 m3) / 2          cos(2 q2) yaw term
    a[2]  (Iyy3 - Ixx3) / 2                    cos(2 q23) yaw term
    a[3]  Ixy3 (tensor entry)                  sin(2 q23) yaw term
    a[4]  l2 * mx3
    a[5]  l2 * my3
    a[6]  Izz2 + l2^2 m3 + Dr2
    a[7]  Izz3
    a[8]  Dr3
    a[9]  l2 m3 + mx2                          gravity, joint 2
    a[10] mx3
    a[11] my3
    a[12:15] viscous damping diagonal B

Link 2 is symmetric about its own axis, so its off-axis first moment and
product of inertia vanish and do not appear. With Coulomb friction the
vector grows to 18 (``D`` diagonal appended).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels

GRAVITY = 9.81
N_DYN = _kernels.N_DYN


def _diag3(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.shape == (1,):
        arr = np.repeat(arr, 3)
    if arr.shape != (3,):
        raise ValueError(f"expected 3 diagonal entries, got {arr.shape}")
    return arr


@dataclass
class PlantModel:
    """Physical truth of the simulated arm (reference arm values by default).

    Diagonal matrices are stored as their diagonals. Body order is link 1,
    link 2, link 3, tool. Inertias are principal values about each body's
    COM, with x along the body's long axis except link 1, whose long axis
    is its local y (vertical).
    """

    masses: np.ndarray = field(default_factory=lambda: np.array([1.6, 0.6, 0.6, 0.8]))
    inertias: np.ndarray = field(default_factory=lambda: np.array([
        [0.4320, 0.0720, 0.4320],
        [0.0054, 0.1620, 0.1620],
        [0.0054, 0.1620, 0.1620],
        [0.0032, 0.0960, 0.0960],
    ]))
    lengths: np.ndarray = field(default_factory=lambda: np.array([1.8, 1.8, 1.8, 1.2]))
    com: np.ndarray = field(default_factory=lambda: np.array([0.9, 0.9, 0.9, 0.6]))
    tool_angle: float = np.pi / 6.0
    damping: np.ndarray = field(default_factory=lambda: np.array([0.20, 0.15, 0.10]))
    motor_gain: np.ndarray = field(default_factory=lambda: np.array([60.0, 30.0, 10.0]))
    rotor_inertia: np.ndarray = field(default_factory=lambda: np.array([0.6, 0.3, 0.1]))
    stiffness: np.ndarray | None = None
    rotor_damping: np.ndarray = field(default_factory=lambda: np.array([0.30, 0.20, 0.15]))
    coulomb: np.ndarray | None = None
    gravity: float = GRAVITY

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float).reshape(4)
        self.inertias = np.asarray(self.inertias, dtype=float).reshape(4, 3)
        self.lengths = np.asarray(self.lengths, dtype=float).reshape(4)
        self.com = np.asarray(self.com, dtype=float).reshape(4)
        self.damping = _diag3(self.damping)
        self.motor_gain = _diag3(self.motor_gain)
        self.rotor_inertia = _diag3(self.rotor_inertia)
        self.rotor_damping = _diag3(self.rotor_damping)
        if self.stiffness is not None:
            self.stiffness = _diag3(self.stiffness)
        if self.coulomb is not None:
            self.coulomb = _diag3(self.coulomb)
        for name in ("damping", "motor_gain", "rotor_inertia", "rotor_damping"):
            if np.any(getattr(self, name) <= 0):
                raise ValueError(f"{name} must be positive definite")
        if self.stiffness is not None and np.any(self.stiffness <= 0):
            raise ValueError("stiffness must be positive definite")
        if self.coulomb is not None and np.any(self.coulomb < 0):
            raise ValueError("coulomb coefficients must be nonnegative")

    @property
    def flexible(self) -> bool:
        return self.stiffness is not None

    @property
    def base_height(self) -> float:
        return float(self.lengths[0])

    def kinematic_params(self) -> np.ndarray:
        return self.lengths[1:].copy()

    def _outer_body(self):
        """Mass, first moment and inertia tensor about joint 3 of link 3 + tool."""
        m3, mE = self.masses[2], self.masses[3]
        l3, lcE = self.lengths[2], self.com[3]
        d = self.tool_angle
        c3 = np.array([self.com[2], 0.0, 0.0])
        cE = np.array([l3 + lcE * np.cos(d), lcE * np.sin(d), 0.0])
        R = np.array([[np.cos(d), -np.sin(d), 0.0], [np.sin(d), np.cos(d), 0.0], [0.0, 0.0, 1.0]])
        I3 = np.diag(self.inertias[2]) + m3 * (c3 @ c3 * np.eye(3) - np.outer(c3, c3))
        IE = R @ np.diag(self.inertias[3]) @ R.T + mE * (cE @ cE * np.eye(3) - np.outer(cE, cE))
        first = m3 * c3 + mE * cE
        return m3 + mE, first, I3 + IE

    def dynamic_params(self, rotor: bool = True, friction: bool | None = None) -> np.ndarray:
        """True base-parameter vector.

        ``rotor=True`` folds the rotor inertias into the rigid-body
        parameters (rigid plant); ``rotor=False`` gives the link-side
        parameters used by the flexible plant. ``friction`` defaults to
        whether the model has Coulomb friction.
        """
        l2 = self.lengths[1]
        m2, lc2 = self.masses[1], self.com[1]
        I2c = self.inertias[1]
        Ixx2 = I2c[0]
        Iyy2 = I2c[1] + m2 * lc2 ** 2
        Izz2 = I2c[2] + m2 * lc2 ** 2
        mx2 = m2 * lc2
        m3, first3, I3 = self._outer_body()
        mx3, my3 = first3[0], first3[1]
        dr = self.rotor_inertia if rotor else np.zeros(3)
        a = np.zeros(N_DYN)
        a[0] = self.inertias[0, 1] + dr[0] + 0.5 * (Ixx2 + Iyy2 + I3[0, 0] + I3[1, 1] + l2 ** 2 * m3)
        a[1] = 0.5 * (Iyy2 - Ixx2 + l2 ** 2 * m3)
        a[2] = 0.5 * (I3[1, 1] - I3[0, 0])
        a[3] = I3[0, 1]
        a[4] = l2 * mx3
        a[5] = l2 * my3
        a[6] = Izz2 + l2 ** 2 * m3 + dr[1]
        a[7] = I3[2, 2]
        a[8] = dr[2]
        a[9] = l2 * m3 + mx2
        a[10] = mx3
        a[11] = my3
        a[12:15] = self.damping
        if friction is None:
            friction = self.coulomb is not None
        if friction:
            d = self.coulomb if self.coulomb is not None else np.zeros(3)
            a = np.concatenate([a, d])
        return a

    def rigid_equivalent(self) -> "PlantModel":
        """Infinite-stiffness limit of a flexible plant.

        Rotor inertia is already part of the rigid parametrization; rotor
        damping adds to the link damping.
        """
        return replace(self, stiffness=None, damping=self.damping + self.rotor_damping)


# ---------------------------------------------------------------- kinematics

def _segments(q, tool_angle):
    q = np.asarray(q)
    q23 = q[1] + q[2]
    phis = np.array([q[1], q23, q23 + tool_angle])
    dphi = np.array([[0.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
    return phis, dphi


def forward_kinematics(q, a_k, base_height: float = 1.8, tool_angle: float = np.pi / 6.0) -> np.ndarray:
    """Tool-tip position x = f(q) for kinematic parameters ``a_k``."""
    q = np.asarray(q, dtype=float)
    phis, _ = _segments(q, tool_angle)
    s1, c1 = np.sin(q[0]), np.cos(q[0])
    a_k = np.asarray(a_k, dtype=float)
    r = np.sum(a_k * np.cos(phis))
    z = np.sum(a_k * np.sin(phis))
    return np.array([-s1 * r, c1 * r, base_height + z])


def jacobian_basis(q, tool_angle: float = np.pi / 6.0) -> np.ndarray:
    """Stack ``Jb`` with ``J(q; a_k) = sum_i a_k[i] * Jb[i]``."""
    return _kernels.jacobian_basis(np.ascontiguousarray(q, dtype=float), float(tool_angle))


def jacobian_dot_basis(q, qd, tool_angle: float = np.pi / 6.0) -> np.ndarray:
    """Time derivative of :func:`jacobian_basis` along joint velocity ``qd``."""
    return _kernels.jacobian_dot_basis(np.ascontiguousarray(q, dtype=float),
                                       np.ascontiguousarray(qd, dtype=float), float(tool_angle))


def jacobian(q, a_k, tool_angle: float = np.pi / 6.0) -> np.ndarray:
    return (np.asarray(a_k, dtype=float) @ jacobian_basis(q, tool_angle).reshape(3, 9)).reshape(3, 3)


def jacobian_dot(q, qd, a_k, tool_angle: float = np.pi / 6.0) -> np.ndarray:
    return (np.asarray(a_k, dtype=float) @ jacobian_dot_basis(q, qd, tool_angle).reshape(3, 9)).reshape(3, 3)


def kinematic_regressor(q, psi, tool_angle: float = np.pi / 6.0) -> np.ndarray:
    """Y_k(q, psi) with ``J(q; a_k) psi = Y_k a_k`` for every ``a_k``."""
    return np.einsum("imn,n->mi", jacobian_basis(q, tool_angle), np.asarray(psi, dtype=float))


# ---------------------------------------------------------------- dynamics

def _sign(v) -> np.ndarray:
    return np.sign(np.asarray(v, dtype=float))


def dynamic_regressor(q, qd, z, zd, gravity: float = GRAVITY, friction: bool = False) -> np.ndarray:
    """Y_d with ``Y_d a_d = M zd + C(q, qd) z + B z + g``.

    With ``friction=True`` three columns ``diag(sgn(z))`` are appended for
    the Coulomb coefficients.
    """
    f = lambda v: np.ascontiguousarray(v, dtype=float)
    Y = _kernels.dynamic_regressor(f(q), f(qd), f(z), f(zd), float(gravity))
    if friction:
        Y = np.hstack([Y, np.diag(_sign(z))])
    return Y


def inertia_regressor(q, v, gravity: float = GRAVITY) -> np.ndarray:
    """Regressor of M(q) v (no damping or gravity columns populated)."""
    zero = np.zeros(3)
    return dynamic_regressor(q, zero, zero, v, gravity) - dynamic_regressor(q, zero, zero, zero, gravity)


def lagrangian_gradient_regressor(q, qd, gravity: float = GRAVITY) -> np.ndarray:
    """Regressor of ``0.5 * qd^T dM/dq_i qd`` (the C^T qd term)."""
    Mb, dMb, _ = _kernels.inertia_basis(np.ascontiguousarray(q, dtype=float), float(gravity))
    qd = np.asarray(qd, dtype=float)
    Y = np.zeros((3, N_DYN))
    Y[:, :_kernels.N_INERTIAL] = 0.5 * np.einsum("pjki,j,k->ip", dMb, qd, qd)
    return Y


def gravity_damping_regressor(q, v, gravity: float = GRAVITY) -> np.ndarray:
    """Regressor of ``B v + g(q)``."""
    zero = np.zeros(3)
    return dynamic_regressor(q, zero, v, zero, gravity)


def mass_matrix(q, a) -> np.ndarray:
    """M(q) from a base-parameter vector (fast path used by the plant)."""
    M, _ = _kernels.mass_bias(np.ascontiguousarray(q, dtype=float), np.zeros(3),
                              np.ascontiguousarray(a[:N_DYN], dtype=float), GRAVITY)
    return M


# Independent route: rigid-body sums over the geometric Jacobian. Used as
# the oracle for the regressor and as the reference M, C, g.

def _rot_z(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]], dtype=t.dtype if hasattr(t, "dtype") else float)


def _rot_x(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]], dtype=t.dtype if hasattr(t, "dtype") else float)


# body x along local y (arm plane), body y along local z, body z along the pitch axis
_PITCH_FRAME = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
# link 1: body y vertical
_BASE_FRAME = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])


def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _body_mass_matrix(q, model: PlantModel):
    """M(q) and g(q) from per-body geometric Jacobians; complex-safe in q."""
    dtype = np.result_type(np.asarray(q).dtype, float)
    q = np.asarray(q, dtype=dtype)
    Rz = _rot_z(q[0])
    l1, l2, l3, _ = model.lengths
    ey = np.array([0.0, 1.0, 0.0])
    o2 = np.array([0.0, 0.0, l1], dtype=dtype)
    R2 = Rz @ _rot_x(q[1])
    o3 = o2 + R2 @ (l2 * ey)
    R3 = Rz @ _rot_x(q[1] + q[2])
    oE = o3 + R3 @ (l3 * ey)
    RE = Rz @ _rot_x(q[1] + q[2] + model.tool_angle)

    pitch_axis = Rz @ np.array([1.0, 0.0, 0.0])
    axes = [np.array([0.0, 0.0, 1.0], dtype=dtype), pitch_axis, pitch_axis]
    origins = [np.zeros(3, dtype=dtype), o2, o3]

    bodies = [
        (Rz @ _BASE_FRAME, np.array([0.0, 0.0, model.com[0]], dtype=dtype), 1),
        (R2 @ _PITCH_FRAME, o2 + R2 @ (model.com[1] * ey), 2),
        (R3 @ _PITCH_FRAME, o3 + R3 @ (model.com[2] * ey), 3),
        (RE @ _PITCH_FRAME, oE + RE @ (model.com[3] * ey), 3),
    ]
    M = np.zeros((3, 3), dtype=dtype)
    g = np.zeros(3, dtype=dtype)
    potential = 0.0
    for b, (R, pc, n_joints) in enumerate(bodies):
        Jv = np.zeros((3, 3), dtype=dtype)
        Jw = np.zeros((3, 3), dtype=dtype)
        for j in range(n_joints):
            Jv[:, j] = _cross(axes[j], pc - origins[j])
            Jw[:, j] = axes[j]
        Iw = R @ np.diag(model.inertias[b]) @ R.T
        M = M + model.masses[b] * Jv.T @ Jv + Jw.T @ Iw @ Jw
        g = g + model.masses[b] * model.gravity * Jv[2, :]
        potential = potential + model.masses[b] * model.gravity * pc[2]
    return M, g, potential


def link_inertia(q, model: PlantModel) -> np.ndarray:
    """Link-side inertia matrix M0(q) (rotor inertia excluded)."""
    return _body_mass_matrix(np.asarray(q, dtype=float), model)[0]


def _inertia_derivatives(q, model: PlantModel, h: float = 1e-20) -> np.ndarray:
    """dM/dq_k by complex step (exact to rounding); shape (3, 3, 3) [i, j, k]."""
    q = np.asarray(q, dtype=float)
    dM = np.zeros((3, 3, 3))
    for k in range(3):
        qc = q.astype(complex)
        qc[k] += 1j * h
        dM[:, :, k] = _body_mass_matrix(qc, model)[0].imag / h
    return dM


def mass_coriolis_gravity(q, qd, model: PlantModel, rotor: bool = False):
    """(M, C, g) of the arm via rigid-body sums and Christoffel symbols.

    ``rotor=False`` returns the link-side inertia M0; ``rotor=True`` adds
    the rotor inertia diagonal, which is the inertia of the rigid plant.
    """
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    M, g, _ = _body_mass_matrix(q, model)
    if rotor:
        M = M + np.diag(model.rotor_inertia)
    dM = _inertia_derivatives(q, model)
    # gamma[i, j, k] = 0.5 (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i)
    gamma = 0.5 * (dM + np.einsum("ikj->ijk", dM) - np.einsum("jki->ijk", dM))
    C = np.einsum("ijk,k->ij", gamma, qd)
    return M, C, g.real


def inertia_rate(q, qd, model: PlantModel) -> np.ndarray:
    """dM/dt along ``qd`` (rotor inertia is constant and drops out)."""
    return np.einsum("ijk,k->ij", _inertia_derivatives(q, model), np.asarray(qd, dtype=float))


def rigid_accel(q, qd, u, model: PlantModel) -> np.ndarray:
    """qdd = M^-1 (K u - C qd - B qd - g - D sgn(qd)) for the rigid plant."""
    x = np.concatenate([np.asarray(q, dtype=float), np.asarray(qd, dtype=float)])
    coulomb = model.coulomb if model.coulomb is not None else np.zeros(3)
    return _kernels.rigid_rhs(x, np.asarray(u, dtype=float), model.dynamic_params(rotor=True, friction=False),
                              model.motor_gain, coulomb, model.gravity)[3:]


def flexible_accel(q, qd, theta, thetad, u, model: PlantModel):
    """(qdd, thetadd) of the elastic-joint plant."""
    if model.stiffness is None:
        raise ValueError("model has no joint stiffness")
    x = np.concatenate([np.asarray(v, dtype=float) for v in (q, qd, theta, thetad)])
    coulomb = model.coulomb if model.coulomb is not None else np.zeros(3)
    out = _kernels.flexible_rhs(x, np.asarray(u, dtype=float), model.dynamic_params(rotor=False, friction=False),
                                model.motor_gain, coulomb, model.stiffness, model.rotor_inertia,
                                model.rotor_damping, model.gravity)
    return out[3:6], out[9:12]


def potential_energy(q, model: PlantModel) -> float:
    """Gravitational potential energy of the four bodies."""
    return float(_body_mass_matrix(np.asarray(q, dtype=float), model)[2])


@dataclass(frozen=True)
class Arm:
    """Structure of the arm known to a controller (parameters stay unknown)."""

    tool_angle: float = np.pi / 6.0
    base_height: float = 1.8
    gravity: float = GRAVITY
    friction: bool = False
    n: int = 3
    m: int = 3

    @property
    def n_dyn(self) -> int:
        return N_DYN + (3 if self.friction else 0)

    def forward_kinematics(self, q, a_k):
        return forward_kinematics(q, a_k, self.base_height, self.tool_angle)

    def jacobian(self, q, a_k):
        return jacobian(q, a_k, self.tool_angle)

    def jacobian_dot(self, q, qd, a_k):
        return jacobian_dot(q, qd, a_k, self.tool_angle)

    def kinematic_regressor(self, q, psi):
        return kinematic_regressor(q, psi, self.tool_angle)

    def dynamic_regressor(self, q, qd, z, zd):
        return dynamic_regressor(q, qd, z, zd, self.gravity, self.friction)

    def filtered_regressor_parts(self, q, qd):
        """Regressors of M qd and of (-C^T qd + B qd + g [+ D sgn(qd)]).

        Their sum after the swap ``M qdd + C qd = d/dt(M qd) - C^T qd`` gives
        Y_d(q, qd, qd, qdd) without the acceleration.
        """
        Ym = inertia_regressor(q, qd, self.gravity)
        Yr = gravity_damping_regressor(q, qd, self.gravity) - lagrangian_gradient_regressor(q, qd, self.gravity)
        if self.friction:
            Ym = np.hstack([Ym, np.zeros((3, 3))])
            Yr = np.hstack([Yr, np.diag(_sign(qd))])
        return Ym, Yr
