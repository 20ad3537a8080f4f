"""Compiled inner-rate kernels for the 3-DOF arm.

Everything here is plain scalar/array code so numba can compile it. The
dynamic parameter vector ``a`` uses the base-parameter ordering documented
in :mod:`dynmod.model`; entries 12..14 are the viscous damping diagonal.
"""

import numpy as np
from numba import njit

N_INERTIAL = 12
N_DYN = 15

# servo modes
PI_VELOCITY = 0
PID_POSITION = 1


@njit(cache=True)
def inertia_basis(q, gravity):
    """Basis matrices of M(q), their q-derivatives and the gravity basis.

    Returns ``(Mb, dMb, gb)`` with ``M = sum_p a_p Mb[p]``,
    ``dMb[p, i, j, k] = d Mb[p, i, j] / d q_k`` and ``g = sum_p a_p gb[p]``.
    """
    q2 = q[1]
    q3 = q[2]
    q23 = q2 + q3
    c2 = np.cos(q2)
    s2 = np.sin(q2)
    c3 = np.cos(q3)
    s3 = np.sin(q3)
    c23 = np.cos(q23)
    s23 = np.sin(q23)

    Mb = np.zeros((N_INERTIAL, 3, 3))
    dMb = np.zeros((N_INERTIAL, 3, 3, 3))
    gb = np.zeros((N_INERTIAL, 3))

    # yaw inertia terms
    Mb[0, 0, 0] = 1.0
    Mb[1, 0, 0] = np.cos(2.0 * q2)
    dMb[1, 0, 0, 1] = -2.0 * np.sin(2.0 * q2)
    Mb[2, 0, 0] = np.cos(2.0 * q23)
    dMb[2, 0, 0, 1] = -2.0 * np.sin(2.0 * q23)
    dMb[2, 0, 0, 2] = -2.0 * np.sin(2.0 * q23)
    Mb[3, 0, 0] = np.sin(2.0 * q23)
    dMb[3, 0, 0, 1] = 2.0 * np.cos(2.0 * q23)
    dMb[3, 0, 0, 2] = 2.0 * np.cos(2.0 * q23)

    # first moment of the outer body times l2, along and across link 3
    Mb[4, 0, 0] = 2.0 * c2 * c23
    dMb[4, 0, 0, 1] = -2.0 * np.sin(2.0 * q2 + q3)
    dMb[4, 0, 0, 2] = -2.0 * c2 * s23
    Mb[4, 1, 1] = 2.0 * c3
    dMb[4, 1, 1, 2] = -2.0 * s3
    Mb[4, 1, 2] = c3
    Mb[4, 2, 1] = c3
    dMb[4, 1, 2, 2] = -s3
    dMb[4, 2, 1, 2] = -s3

    Mb[5, 0, 0] = -2.0 * c2 * s23
    dMb[5, 0, 0, 1] = -2.0 * np.cos(2.0 * q2 + q3)
    dMb[5, 0, 0, 2] = -2.0 * c2 * c23
    Mb[5, 1, 1] = -2.0 * s3
    dMb[5, 1, 1, 2] = -2.0 * c3
    Mb[5, 1, 2] = -s3
    Mb[5, 2, 1] = -s3
    dMb[5, 1, 2, 2] = -c3
    dMb[5, 2, 1, 2] = -c3

    # pitch inertias
    Mb[6, 1, 1] = 1.0
    Mb[7, 1, 1] = 1.0
    Mb[7, 1, 2] = 1.0
    Mb[7, 2, 1] = 1.0
    Mb[7, 2, 2] = 1.0
    Mb[8, 2, 2] = 1.0

    # gravity
    gb[9, 1] = gravity * c2
    gb[10, 1] = gravity * c23
    gb[10, 2] = gravity * c23
    gb[11, 1] = -gravity * s23
    gb[11, 2] = -gravity * s23
    return Mb, dMb, gb


@njit(cache=True)
def dynamic_regressor(q, qd, z, zd, gravity):
    """Y_d(q, qd, z, zd) with 15 columns (inertial + viscous damping)."""
    Mb, dMb, gb = inertia_basis(q, gravity)
    Y = np.zeros((3, N_DYN))
    for p in range(N_INERTIAL):
        for i in range(3):
            acc = gb[p, i]
            for j in range(3):
                acc += Mb[p, i, j] * zd[j]
                cij = 0.0
                for k in range(3):
                    cij += 0.5 * (dMb[p, i, j, k] + dMb[p, i, k, j] - dMb[p, j, k, i]) * qd[k]
                acc += cij * z[j]
            Y[i, p] = acc
    for i in range(3):
        Y[i, N_INERTIAL + i] = z[i]
    return Y


@njit(cache=True)
def mass_bias(q, qd, a, gravity):
    """Return M(q) and h = C(q, qd) qd + B qd + g(q) for parameters ``a``."""
    Mb, dMb, gb = inertia_basis(q, gravity)
    M = np.zeros((3, 3))
    dM = np.zeros((3, 3, 3))
    g = np.zeros(3)
    for p in range(N_INERTIAL):
        ap = a[p]
        if ap == 0.0:
            continue
        for i in range(3):
            g[i] += ap * gb[p, i]
            for j in range(3):
                M[i, j] += ap * Mb[p, i, j]
                for k in range(3):
                    dM[i, j, k] += ap * dMb[p, i, j, k]
    h = np.zeros(3)
    for i in range(3):
        acc = g[i] + a[N_INERTIAL + i] * qd[i]
        for j in range(3):
            for k in range(3):
                acc += (dM[i, j, k] - 0.5 * dM[j, k, i]) * qd[j] * qd[k]
        h[i] = acc
    return M, h


@njit(cache=True)
def _sign(v):
    out = np.zeros(v.shape[0])
    for i in range(v.shape[0]):
        if v[i] > 0.0:
            out[i] = 1.0
        elif v[i] < 0.0:
            out[i] = -1.0
    return out


@njit(cache=True)
def rigid_rhs(x, u, a, motor, coulomb, gravity):
    q = x[0:3]
    qd = x[3:6]
    M, h = mass_bias(q, qd, a, gravity)
    tau = motor * u - h - coulomb * _sign(qd)
    out = np.empty(6)
    out[0:3] = qd
    out[3:6] = np.linalg.solve(M, tau)
    return out


@njit(cache=True)
def flexible_rhs(x, u, a_link, motor, coulomb, stiffness, rotor_inertia, rotor_damping, gravity):
    q = x[0:3]
    qd = x[3:6]
    th = x[6:9]
    thd = x[9:12]
    M, h = mass_bias(q, qd, a_link, gravity)
    spring = stiffness * (th - q)
    out = np.empty(12)
    out[0:3] = qd
    out[3:6] = np.linalg.solve(M, spring - h - coulomb * _sign(qd))
    out[6:9] = thd
    out[9:12] = (motor * u - rotor_damping * thd - spring) / rotor_inertia
    return out


@njit(cache=True)
def servo_output(mode, kp, ki, kd, pos, vel, qc, qcd, integral):
    if mode == PI_VELOCITY:
        return -kp * (vel - qcd) - ki * (pos - qc)
    return -kd * (vel - qcd) - kp * (pos - qc) - ki * integral


@njit(cache=True)
def advance_inner(x, flexible, n_ticks, substeps, dt,
                  mode, kp, ki, kd, qc, qcd, integral, prev_err, have_prev,
                  a, motor, coulomb, stiffness, rotor_inertia, rotor_damping,
                  gravity, ceiling):
    """Run ``n_ticks`` inner servo periods with a held command.

    Each tick reads the servoed coordinate (link or rotor side), evaluates
    the decentralized servo, holds ``u`` and integrates the plant by RK4 in
    ``substeps`` equal slices. Returns ``(x, u, integral, prev_err,
    have_prev, ok)``; ``ok`` is False once any state exceeds ``ceiling``.
    """
    h = dt / substeps
    u = np.zeros(3)
    for _ in range(n_ticks):
        if flexible:
            pos = x[6:9]
            vel = x[9:12]
        else:
            pos = x[0:3]
            vel = x[3:6]
        err = pos - qc
        if mode == PID_POSITION:
            if have_prev:
                integral = integral + 0.5 * dt * (prev_err + err)
            prev_err = err.copy()
            have_prev = True
        u = servo_output(mode, kp, ki, kd, pos, vel, qc, qcd, integral)
        for _s in range(substeps):
            if flexible:
                k1 = flexible_rhs(x, u, a, motor, coulomb, stiffness, rotor_inertia, rotor_damping, gravity)
                k2 = flexible_rhs(x + 0.5 * h * k1, u, a, motor, coulomb, stiffness, rotor_inertia, rotor_damping, gravity)
                k3 = flexible_rhs(x + 0.5 * h * k2, u, a, motor, coulomb, stiffness, rotor_inertia, rotor_damping, gravity)
                k4 = flexible_rhs(x + h * k3, u, a, motor, coulomb, stiffness, rotor_inertia, rotor_damping, gravity)
            else:
                k1 = rigid_rhs(x, u, a, motor, coulomb, gravity)
                k2 = rigid_rhs(x + 0.5 * h * k1, u, a, motor, coulomb, gravity)
                k3 = rigid_rhs(x + 0.5 * h * k2, u, a, motor, coulomb, gravity)
                k4 = rigid_rhs(x + h * k3, u, a, motor, coulomb, gravity)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for i in range(x.shape[0]):
            if not np.isfinite(x[i]) or abs(x[i]) > ceiling:
                return x, u, integral, prev_err, have_prev, False
    return x, u, integral, prev_err, have_prev, True


@njit(cache=True)
def jacobian_basis(q, tool_angle):
    """``Jb`` with ``J(q; a_k) = sum_i a_k[i] Jb[i]``."""
    s1 = np.sin(q[0])
    c1 = np.cos(q[0])
    q23 = q[1] + q[2]
    phis = np.array([q[1], q23, q23 + tool_angle])
    Jb = np.zeros((3, 3, 3))
    for i in range(3):
        sp = np.sin(phis[i])
        cp = np.cos(phis[i])
        Jb[i, 0, 0] = -c1 * cp
        Jb[i, 1, 0] = -s1 * cp
        col0 = s1 * sp
        col1 = -c1 * sp
        col2 = cp
        # link 1 tilts only with q2, the rest with q2 + q3
        for k in range(1, 3 if i > 0 else 2):
            Jb[i, 0, k] += col0
            Jb[i, 1, k] += col1
            Jb[i, 2, k] += col2
    return Jb


@njit(cache=True)
def jacobian_dot_basis(q, qd, tool_angle):
    """Time derivative of :func:`jacobian_basis` along ``qd``."""
    s1 = np.sin(q[0])
    c1 = np.cos(q[0])
    q23 = q[1] + q[2]
    phis = np.array([q[1], q23, q23 + tool_angle])
    Jd = np.zeros((3, 3, 3))
    for i in range(3):
        sp = np.sin(phis[i])
        cp = np.cos(phis[i])
        w = qd[1] if i == 0 else qd[1] + qd[2]
        Jd[i, 0, 0] = s1 * cp * qd[0] + c1 * sp * w
        Jd[i, 1, 0] = -c1 * cp * qd[0] + s1 * sp * w
        col0 = c1 * sp * qd[0] + s1 * cp * w
        col1 = s1 * sp * qd[0] - c1 * cp * w
        col2 = -sp * w
        for k in range(1, 3 if i > 0 else 2):
            Jd[i, 0, k] += col0
            Jd[i, 1, k] += col1
            Jd[i, 2, k] += col2
    return Jd
