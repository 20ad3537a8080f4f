import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dynmod import _kernels
from dynmod.model import (Arm, PlantModel, dynamic_regressor, forward_kinematics, inertia_rate, jacobian,
                          jacobian_dot, kinematic_regressor, link_inertia, mass_coriolis_gravity,
                          mass_matrix, potential_energy, rigid_accel)
from dynmod.validate import (EIG_REF, M0_REF, Q0, X0_REF, check_dynamic_regressor,
                             check_kinematic_regressor, check_skew_symmetry)

angles = arrays(np.float64, 3, elements=st.floats(-np.pi, np.pi))
rates = arrays(np.float64, 3, elements=st.floats(-3.0, 3.0))


def test_forward_kinematics_anchor():
    x = forward_kinematics(Q0, PlantModel().kinematic_params())
    np.testing.assert_allclose(x, X0_REF, atol=1e-3)


def test_link_inertia_anchor_and_eigenvalues():
    M0 = link_inertia(np.zeros(3), PlantModel())
    np.testing.assert_allclose(M0, M0_REF, atol=1e-3)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(M0)), EIG_REF, atol=1e-3)


def test_dynamic_regressor_matches_rigid_body_oracle():
    ok, detail = check_dynamic_regressor(n=1000)
    assert ok, detail


def test_dynamic_regressor_oracle_detects_wrong_parameters():
    ok, _ = check_dynamic_regressor(n=20, perturb_ad=1e-3)
    assert not ok


def test_kinematic_regressor_matches_jacobian():
    ok, detail = check_kinematic_regressor(n=1000)
    assert ok, detail


def test_skew_symmetry():
    ok, detail = check_skew_symmetry(n=1000)
    assert ok, detail


@settings(max_examples=50, deadline=None)
@given(angles, rates)
def test_jacobian_is_derivative_of_forward_kinematics(q, psi):
    a_k = PlantModel().kinematic_params()
    h = 1e-6
    fd = (forward_kinematics(q + h * psi, a_k) - forward_kinematics(q - h * psi, a_k)) / (2 * h)
    np.testing.assert_allclose(jacobian(q, a_k) @ psi, fd, atol=1e-7)


@settings(max_examples=50, deadline=None)
@given(angles, rates)
def test_jacobian_dot_is_time_derivative(q, qd):
    a_k = np.array([1.8, 1.8, 1.2])
    h = 1e-6
    fd = (jacobian(q + h * qd, a_k) - jacobian(q - h * qd, a_k)) / (2 * h)
    np.testing.assert_allclose(jacobian_dot(q, qd, a_k), fd, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(angles)
def test_mass_matrix_from_parameters_matches_body_sum(q):
    m = PlantModel()
    M, _, _ = mass_coriolis_gravity(q, np.zeros(3), m, rotor=True)
    np.testing.assert_allclose(mass_matrix(q, m.dynamic_params()), M, atol=1e-10)
    assert np.linalg.eigvalsh(M).min() > 0


@settings(max_examples=50, deadline=None)
@given(angles, rates)
def test_gravity_is_gradient_of_potential(q, psi):
    m = PlantModel()
    _, _, g = mass_coriolis_gravity(q, np.zeros(3), m)
    h = 1e-6
    fd = (potential_energy(q + h * psi, m) - potential_energy(q - h * psi, m)) / (2 * h)
    assert g @ psi == pytest.approx(fd, abs=1e-6)


def test_inertia_rate_is_time_derivative():
    m = PlantModel()
    q, qd = np.array([0.2, -0.7, 1.1]), np.array([0.5, -1.0, 2.0])
    h = 1e-6
    fd = (link_inertia(q + h * qd, m) - link_inertia(q - h * qd, m)) / (2 * h)
    np.testing.assert_allclose(inertia_rate(q, qd, m), fd, atol=1e-7)


def test_rigid_accel_solves_equation_of_motion():
    m = PlantModel()
    q, qd, u = np.array([0.3, 0.4, -0.9]), np.array([0.1, -0.2, 0.3]), np.array([1.0, -2.0, 0.5])
    qdd = rigid_accel(q, qd, u, m)
    M, C, g = mass_coriolis_gravity(q, qd, m, rotor=True)
    np.testing.assert_allclose(M @ qdd + C @ qd + m.damping * qd + g, m.motor_gain * u, atol=1e-9)


def test_energy_is_conserved_without_damping_or_input():
    m = PlantModel()
    a = m.dynamic_params(rotor=True, friction=False).copy()
    a[12:15] = 0.0

    def energy(x):
        M, _, _ = mass_coriolis_gravity(x[:3], x[3:], m, rotor=True)
        return 0.5 * x[3:] @ M @ x[3:] + potential_energy(x[:3], m)

    f = lambda x: _kernels.rigid_rhs(x, np.zeros(3), a, m.motor_gain, np.zeros(3), m.gravity)
    x = np.array([0.3, 0.5, -1.0, 0.5, -0.4, 0.8])
    e0, h = energy(x), 5e-5
    for _ in range(20000):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    assert abs(energy(x) - e0) / abs(e0) < 1e-6


def test_friction_column_block():
    q, qd = np.array([0.1, 0.2, 0.3]), np.array([1.0, -1.0, 0.0])
    Y = dynamic_regressor(q, qd, qd, qd, friction=True)
    assert Y.shape == (3, 18)
    np.testing.assert_array_equal(Y[:, 15:], np.diag([1.0, -1.0, 0.0]))


def test_filtered_parts_reassemble_regressor():
    # Y_m(q, qd) + d/dt parts must equal Y_d(q, qd, qd, qdd) for any qdd
    arm = Arm()
    q, qd, qdd = np.array([0.4, -0.3, 0.8]), np.array([0.7, 0.2, -0.5]), np.array([0.3, -1.2, 0.9])
    Ym, Yr = arm.filtered_regressor_parts(q, qd)
    h = 1e-6
    Ym_p, _ = arm.filtered_regressor_parts(q + h * qd, qd + h * qdd)
    Ym_m, _ = arm.filtered_regressor_parts(q - h * qd, qd - h * qdd)
    np.testing.assert_allclose((Ym_p - Ym_m) / (2 * h) + Yr, arm.dynamic_regressor(q, qd, qd, qdd), atol=1e-6)


def test_kinematic_regressor_shape():
    assert kinematic_regressor(Q0, np.ones(3)).shape == (3, 3)


def test_plant_rejects_nonpositive_values():
    with pytest.raises(ValueError):
        PlantModel(damping=[0.2, 0.0, 0.1])
    with pytest.raises(ValueError):
        PlantModel(stiffness=[1.0, -1.0, 1.0])


def test_rigid_equivalent_folds_rotor_damping():
    m = PlantModel(stiffness=[1e6, 1e6, 1e6]).rigid_equivalent()
    assert not m.flexible
    np.testing.assert_allclose(m.damping, [0.5, 0.35, 0.25])
