"""Rigid-body dynamics on TSE(3), quadrotor parameters, and rotor mixing.

State x = (R, xi, omega, v): attitude body->inertial, position [m], body
angular velocity [rad/s], inertial linear velocity [m/s]. The control wrench
is u = (T, tau): a thrust along a body-fixed axis [N] plus a body torque
[N*m]. Gravity is the only external force (f_e = -m*a_g*e3); the external
torque is zero. Both hooks remain injectable for extensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .so3 import assert_rotation, skew

E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class RigidState:
    """Full state (R, xi, omega, v) on TSE(3)."""

    R: np.ndarray
    xi: np.ndarray
    omega: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", assert_rotation(self.R))
        for name in ("xi", "omega", "v"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (3,) or not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, a)


@dataclass(frozen=True)
class ControlInput:
    """Wrench-level input: thrust T [N] and body torque tau [N*m]."""

    thrust: float
    torque: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "thrust", float(self.thrust))
        tau = np.asarray(self.torque, dtype=float)
        if tau.shape != (3,) or not np.all(np.isfinite(tau)) or not np.isfinite(self.thrust):
            raise ValueError("control input must be finite with a 3-vector torque")
        object.__setattr__(self, "torque", tau)

    def as_array(self):
        return np.concatenate(([self.thrust], self.torque))


@dataclass(frozen=True)
class RigidBodyParams:
    """Mass [kg], inertia tensor [kg*m^2], thrust axis (unit, body frame),
    gravitational acceleration [m/s^2]."""

    mass: float = 1.03
    inertia: np.ndarray = field(
        default_factory=lambda: np.diag([16.83e-3, 16.83e-3, 28.34e-3])
    )
    thrust_axis: np.ndarray = field(default_factory=lambda: E3.copy())
    gravity: float = 9.81

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not self.gravity > 0:
            raise ValueError("gravity must be positive")
        J = np.asarray(self.inertia, dtype=float)
        if J.shape != (3, 3) or np.linalg.norm(J - J.T) > 1e-12:
            raise ValueError("inertia must be symmetric 3x3")
        if np.any(np.linalg.eigvalsh(J) <= 0):
            raise ValueError("inertia must be positive definite")
        axis = np.asarray(self.thrust_axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError("thrust_axis must be a unit vector")
        object.__setattr__(self, "inertia", J)
        object.__setattr__(self, "thrust_axis", axis)
        object.__setattr__(self, "inertia_inv", np.linalg.inv(J))

    @property
    def hover_thrust(self):
        return self.mass * self.gravity


@dataclass(frozen=True)
class QuadrotorParams:
    """Quadrotor geometry on top of the rigid body: arm length l [m], the
    torque-per-thrust constant c_tf [m], and per-rotor force bounds [N].

    Defaults are representative of a ~1 kg research quadrotor and should be
    adjusted to the actual vehicle; the rotor bounds default to [0, 12.3] N.
    """

    body: RigidBodyParams = field(default_factory=RigidBodyParams)
    arm_length: float = 0.275
    torque_coeff: float = 0.017
    rotor_min: float = 0.0
    rotor_max: float = 12.3

    def __post_init__(self):
        if not self.arm_length > 0:
            raise ValueError("arm_length must be positive")
        if not self.torque_coeff > 0:
            raise ValueError("torque_coeff must be positive")
        if not self.rotor_min < self.rotor_max:
            raise ValueError("rotor_min must be below rotor_max")
        l, c = self.arm_length, self.torque_coeff
        M = np.array([
            [1.0, 1.0, 1.0, 1.0],
            [0.0, l, 0.0, -l],
            [-l, 0.0, l, 0.0],
            [c, -c, c, -c],
        ])
        object.__setattr__(self, "mixing_matrix", M)
        object.__setattr__(self, "mixing_inverse", np.linalg.inv(M))


@dataclass(frozen=True)
class RotorForces:
    """Individual rotor thrusts f1..f4 [N]."""

    f: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.shape != (4,) or not np.all(np.isfinite(f)):
            raise ValueError("rotor forces must be a finite 4-vector")
        object.__setattr__(self, "f", f)

    def within(self, lo, hi, tol=0.0):
        return bool(np.all(self.f >= lo - tol) and np.all(self.f <= hi + tol))


def total_force(x: RigidState, u: ControlInput, p: RigidBodyParams):
    """Inertial resultant force f = R e_b T - m g e3 [N]."""
    return x.R @ p.thrust_axis * u.thrust - p.mass * p.gravity * E3


def continuous_dynamics(x: RigidState, u: ControlInput, p: RigidBodyParams):
    """Time derivatives (xi_dot, v_dot, R_dot, omega_dot).

    xi_dot = v;  m v_dot = R e_b T - m g e3;  R_dot = R S(omega);
    J omega_dot = -omega x J omega + tau.
    """
    xi_dot = x.v
    v_dot = total_force(x, u, p) / p.mass
    R_dot = x.R @ skew(x.omega)
    omega_dot = p.inertia_inv @ (np.cross(p.inertia @ x.omega, x.omega) + u.torque)
    return xi_dot, v_dot, R_dot, omega_dot


def mix_rotor_forces(f: RotorForces, q: QuadrotorParams) -> ControlInput:
    """Map per-rotor forces to the wrench (T, tau_phi, tau_theta, tau_psi)."""
    u = q.mixing_matrix @ f.f
    return ControlInput(thrust=u[0], torque=u[1:])


def unmix_wrench(u: ControlInput, q: QuadrotorParams) -> RotorForces:
    """Map a wrench back to per-rotor forces (exact inverse of the mixing)."""
    return RotorForces(q.mixing_inverse @ u.as_array())


def saturate_rotor_forces(u: ControlInput, q: QuadrotorParams):
    """Clip the per-rotor forces to bounds and return (clipped input, forces,
    True when clipping changed anything)."""
    f = q.mixing_inverse @ u.as_array()
    f_clipped = np.clip(f, q.rotor_min, q.rotor_max)
    changed = bool(np.any(f_clipped != f))
    u_sat = q.mixing_matrix @ f_clipped
    return ControlInput(thrust=u_sat[0], torque=u_sat[1:]), RotorForces(f_clipped), changed
