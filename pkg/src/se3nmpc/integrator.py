"""Discrete-time propagation: prediction model and high-fidelity plant.

The prediction step `step_predictor` is the controller's model: explicit
Euler on position/velocity plus a variational rotational update closed by
the Cayley map, so predicted rotations never leave SO(3) and the hover
equilibrium is an exact fixed point.

The plant `step_plant` is deliberately a different discretization (RK4 in
exponential local coordinates) so closed-loop runs exercise model mismatch.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .dynamics import ControlInput, RigidBodyParams, RigidState, total_force
from .so3 import cayley


def step_predictor(x: RigidState, u: ControlInput, p: RigidBodyParams, dt: float) -> RigidState:
    """One prediction step of length dt (the model g_d the optimizer uses).

    xi+ = xi + dt*v
    v+  = v + dt*(R e_b T - m g e3)/m          (R, T at step start)
    w_mid = w + (dt/2) J^-1 a,  a = (J w) x w + tau    (a evaluated once)
    R+  = R cay(dt * w_mid)
    w+  = w_mid + (dt/2) J^-1 a
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    xi_next = x.xi + dt * x.v
    v_next = x.v + dt * total_force(x, u, p) / p.mass
    alpha = np.cross(p.inertia @ x.omega, x.omega) + u.torque
    half = 0.5 * dt * (p.inertia_inv @ alpha)
    omega_mid = x.omega + half
    R_next = x.R @ cayley(dt * omega_mid)
    omega_next = omega_mid + half
    return RigidState(R=R_next, xi=xi_next, omega=omega_next, v=v_next)


@njit(cache=True)
def _cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _expm3(v):
    theta = np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if theta < 1e-6:
        a = 1.0 - theta**2 / 6.0
        b = 0.5 - theta**2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta**2
    S = np.zeros((3, 3))
    S[0, 1] = -v[2]
    S[0, 2] = v[1]
    S[1, 0] = v[2]
    S[1, 2] = -v[0]
    S[2, 0] = -v[1]
    S[2, 1] = v[0]
    return np.eye(3) + a * S + b * (S @ S)


@njit(cache=True)
def _dexpinv(theta, omega):
    # truncated inverse differential of exp for right increments
    # (R = R0 expm(theta), body velocity omega); exact enough for 4th order
    # with theta = O(h) per substep
    c = _cross3(theta, omega)
    return omega + 0.5 * c + _cross3(theta, c) / 12.0


@njit(cache=True)
def _plant_deriv(v, th, om, R0, axis, grav, m, T, tau, J, Jinv):
    Rt = R0 @ _expm3(th)
    dv = (Rt @ axis * T + grav) / m
    dth = _dexpinv(th, om)
    dom = Jinv @ (_cross3(J @ om, om) + tau)
    return v, dv, dth, dom


@njit(cache=True)
def _plant_kernel(R0, xi0, v0, om0, h, substeps, m, g, J, Jinv, axis, T, tau):
    grav = np.zeros(3)
    grav[2] = -m * g
    R = R0.copy()
    xi = xi0.copy()
    v = v0.copy()
    om = om0.copy()
    th0 = np.zeros(3)
    for _ in range(substeps):
        a1, b1, c1, d1 = _plant_deriv(v, th0, om, R, axis, grav, m, T, tau, J, Jinv)
        a2, b2, c2, d2 = _plant_deriv(v + 0.5 * h * b1, th0 + 0.5 * h * c1,
                                      om + 0.5 * h * d1, R, axis, grav, m, T, tau, J, Jinv)
        a3, b3, c3, d3 = _plant_deriv(v + 0.5 * h * b2, th0 + 0.5 * h * c2,
                                      om + 0.5 * h * d2, R, axis, grav, m, T, tau, J, Jinv)
        a4, b4, c4, d4 = _plant_deriv(v + h * b3, th0 + h * c3,
                                      om + h * d3, R, axis, grav, m, T, tau, J, Jinv)
        xi = xi + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        v = v + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        th_end = (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        om = om + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        R = R @ _expm3(th_end)
    return R, xi, v, om


def step_plant(
    x: RigidState,
    u: ControlInput,
    p: RigidBodyParams,
    dt: float,
    substeps: int = 10,
) -> RigidState:
    """Propagate the plant truth model over dt with `substeps` RK4 substeps.

    Each substep integrates (xi, v, theta, omega) with classical RK4, where
    theta are exponential coordinates of the rotation relative to the substep
    start; the rotation is then advanced by expm(theta), keeping it on SO(3)
    to round-off without reprojection.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    h = dt / substeps
    R, xi, v, om = _plant_kernel(
        x.R, x.xi, x.v, x.omega, h, substeps, p.mass, p.gravity,
        p.inertia, p.inertia_inv, p.thrust_axis, u.thrust, u.torque,
    )
    return RigidState(R=R, xi=xi, omega=om, v=v)
