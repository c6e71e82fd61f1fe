"""Rigid-body dynamics, rotor mixing, and the two discretizations.

Propagates a tumbling quadrotor open-loop with the prediction model and the
RK4 plant, showing the model mismatch and that neither leaves SO(3).

Run:  python demos/02_rigid_body_flight.py
"""

import numpy as np

from se3nmpc import (ControlInput, QuadrotorParams, RigidState, RotorForces,
                     mix_rotor_forces, step_plant, step_predictor,
                     total_force, unmix_wrench)

quad = QuadrotorParams()
body = quad.body
print(f"vehicle: m={body.mass} kg, hover thrust {body.hover_thrust:.3f} N, "
      f"rotor bounds [{quad.rotor_min}, {quad.rotor_max}] N")

print("\n== rotor mixing ==")
forces = RotorForces(np.array([2.4, 2.6, 2.4, 2.6]))
u = mix_rotor_forces(forces, quad)
print(f"f = {forces.f} ->  T = {u.thrust:.2f} N, tau = {u.torque}")
print("unmix(mix(f)) - f =", unmix_wrench(u, quad).f - forces.f)

print("\n== open-loop propagation, predictor vs plant ==")
x_pred = RigidState(R=np.eye(3), xi=np.zeros(3),
                    omega=np.array([1.0, -0.5, 0.2]), v=np.zeros(3))
x_plant = x_pred
u = ControlInput(thrust=1.2 * body.hover_thrust, torque=np.array([0.02, 0.01, -0.01]))
dt = 0.01
for k in range(200):
    x_pred = step_predictor(x_pred, u, body, dt)
    x_plant = step_plant(x_plant, u, body, dt, substeps=10)

gap_xi = np.linalg.norm(x_pred.xi - x_plant.xi)
gap_R = np.linalg.norm(x_pred.R - x_plant.R, ord="fro")
print(f"after 2 s: position gap {gap_xi:.4f} m, attitude gap {gap_R:.4f} (Frobenius)")
for name, x in (("predictor", x_pred), ("plant", x_plant)):
    drift = np.linalg.norm(x.R.T @ x.R - np.eye(3), ord="fro")
    print(f"{name:9s}: |R^T R - I|_F = {drift:.2e}  (no reprojection)")

print("\n== force balance ==")
hover = RigidState(R=np.eye(3), xi=np.zeros(3), omega=np.zeros(3), v=np.zeros(3))
print("resultant force at hover:",
      total_force(hover, ControlInput(body.hover_thrust, np.zeros(3)), body))
