import numpy as np
import pytest

from se3nmpc import (ControlInput, QuadrotorParams, RigidBodyParams,
                     RigidState, RotorForces, continuous_dynamics, expm_so3,
                     mix_rotor_forces, saturate_rotor_forces, total_force,
                     unmix_wrench)

from conftest import random_state


def hover_state(xi=(0.0, 0.0, 0.0)):
    return RigidState(R=np.eye(3), xi=np.array(xi), omega=np.zeros(3), v=np.zeros(3))


def hover_input(body):
    return ControlInput(thrust=body.hover_thrust, torque=np.zeros(3))


def test_hover_equilibrium_has_zero_tangent(body):
    x = hover_state((1.0, -2.0, 3.0))
    xi_dot, v_dot, R_dot, omega_dot = continuous_dynamics(x, hover_input(body), body)
    assert np.linalg.norm(xi_dot) < 1e-12
    assert np.linalg.norm(v_dot) < 1e-12
    assert np.linalg.norm(R_dot) < 1e-12
    assert np.linalg.norm(omega_dot) < 1e-12


def test_free_fall(body):
    x = hover_state()
    _, v_dot, _, _ = continuous_dynamics(x, ControlInput(0.0, np.zeros(3)), body)
    assert np.allclose(v_dot, [0.0, 0.0, -body.gravity], atol=1e-15)


def test_principal_axis_spin_is_torque_free(body):
    x = RigidState(R=np.eye(3), xi=np.zeros(3), omega=np.array([1.0, 0.0, 0.0]),
                   v=np.zeros(3))
    _, _, _, omega_dot = continuous_dynamics(x, ControlInput(0.0, np.zeros(3)), body)
    # (J w) x w = 0 when w is a principal axis of a diagonal J
    assert np.linalg.norm(omega_dot) <= 1e-14


def test_euler_term_conserves_kinetic_energy(rng, body):
    for _ in range(300):
        w = rng.normal(scale=5.0, size=3)
        gyro = np.cross(w, body.inertia @ w)
        assert abs(w @ gyro) <= 1e-12 * max(1.0, np.linalg.norm(w) ** 3)


def test_rdot_body_velocity_is_skew(rng, body):
    for _ in range(100):
        x = random_state(rng)
        u = ControlInput(rng.uniform(0, 20), rng.normal(size=3))
        _, _, R_dot, _ = continuous_dynamics(x, u, body)
        M = x.R.T @ R_dot
        assert np.linalg.norm(M + M.T, ord="fro") <= 1e-12


def test_total_force_hover_balance(body):
    assert np.linalg.norm(total_force(hover_state(), hover_input(body), body)) <= 1e-12


def test_total_force_zero_thrust(body):
    f = total_force(hover_state(), ControlInput(0.0, np.zeros(3)), body)
    assert np.allclose(f, [0.0, 0.0, -body.mass * body.gravity], atol=1e-15)


def test_total_force_rolled_attitude(body):
    R = expm_so3([np.pi / 2, 0.0, 0.0])
    x = RigidState(R=R, xi=np.zeros(3), omega=np.zeros(3), v=np.zeros(3))
    mg = body.mass * body.gravity
    f = total_force(x, ControlInput(mg, np.zeros(3)), body)
    assert np.allclose(f, mg * np.array([0.0, -1.0, -1.0]), atol=1e-12)


def test_mix_symmetric_hover(quad):
    u = mix_rotor_forces(RotorForces(np.full(4, 2.5)), quad)
    assert abs(u.thrust - 10.0) <= 1e-15
    assert np.linalg.norm(u.torque) <= 1e-15


def test_mix_single_rotor_example():
    quad = QuadrotorParams(arm_length=0.5, torque_coeff=0.1)
    u = mix_rotor_forces(RotorForces(np.array([0.0, 1.0, 0.0, 0.0])), quad)
    assert np.allclose(np.concatenate(([u.thrust], u.torque)),
                       [1.0, 0.5, 0.0, -0.1], atol=1e-15)


def test_mix_zero(quad):
    u = mix_rotor_forces(RotorForces(np.zeros(4)), quad)
    assert u.thrust == 0.0 and np.array_equal(u.torque, np.zeros(3))


def test_unmix_constant_thrust(quad):
    f = unmix_wrench(ControlInput(4 * 2.5, np.zeros(3)), quad)
    assert np.allclose(f.f, np.full(4, 2.5), atol=1e-12)


def test_mix_unmix_round_trip(rng, quad):
    for _ in range(10**4):
        u = ControlInput(rng.uniform(-50, 50), rng.normal(scale=5.0, size=3))
        back = mix_rotor_forces(unmix_wrench(u, quad), quad)
        assert abs(back.thrust - u.thrust) <= 1e-12
        assert np.max(np.abs(back.torque - u.torque)) <= 1e-12


def test_unmix_zero(quad):
    assert np.array_equal(unmix_wrench(ControlInput(0.0, np.zeros(3)), quad).f,
                          np.zeros(4))


def test_saturation_clips_and_remixes(quad):
    u = ControlInput(4 * 20.0, np.zeros(3))  # above the per-rotor max
    u_sat, forces, changed = saturate_rotor_forces(u, quad)
    assert changed
    assert forces.within(quad.rotor_min, quad.rotor_max)
    assert abs(u_sat.thrust - 4 * quad.rotor_max) <= 1e-12
    # in-range input passes through untouched
    u2 = ControlInput(10.0, np.array([0.1, -0.1, 0.02]))
    u2_sat, f2, changed2 = saturate_rotor_forces(u2, quad)
    assert not changed2
    assert abs(u2_sat.thrust - u2.thrust) <= 1e-12


def test_parameter_validation():
    with pytest.raises(ValueError):
        RigidBodyParams(mass=-1.0)
    with pytest.raises(ValueError):
        RigidBodyParams(inertia=np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        RigidBodyParams(thrust_axis=np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        QuadrotorParams(rotor_min=5.0, rotor_max=1.0)
    with pytest.raises(ValueError):
        RigidState(R=np.eye(3) * 1.1, xi=np.zeros(3), omega=np.zeros(3), v=np.zeros(3))
