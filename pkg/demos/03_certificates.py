"""Numeric pre-flight certificates: gain conditions, controllability rank,
sampled dissipativity.

Run:  python demos/03_certificates.py
"""

import numpy as np

from se3nmpc import (ControlInput, CostWeights, QuadrotorParams, RigidState,
                     certify_controllability, check_gain_conditions,
                     discretize_linear, linearize, sample_dissipativity)

quad = QuadrotorParams()
weights = CostWeights()  # kp=150, kv=30, kR=10, komega=0.85, kf=0.05, ktau=0.3

print("== gain conditions (both products must reach 0.25) ==")
check = check_gain_conditions(weights)
print(f"kv*kf        = {check.kv_kf:.3f}  margin {check.margins[0]:+.3f}")
print(f"komega*ktau  = {check.komega_ktau:.3f}  margin {check.margins[1]:+.3f}")
print("passed:", check.passed)

print("\n== N-step controllability of the ZOH linearization at hover ==")
hover = RigidState(R=np.eye(3), xi=np.zeros(3), omega=np.zeros(3), v=np.zeros(3))
u_e = ControlInput(quad.body.hover_thrust, np.zeros(3))
model = discretize_linear(linearize(hover, u_e, quad.body, dt=0.01))
from se3nmpc import controllability_rank
for steps in (1, 2, 3, 4):
    print(f"steps = {steps}: rank = {controllability_rank(model, steps)} (state dim 12)")

cert = certify_controllability(quad, dt=0.01, steps=4, n_random=200, seed=0)
print(f"min 4-step rank over {cert.n_random_states} random admissible states:",
      cert.min_rank_random)

print("\n== sampled dissipativity residuals ==")
rep = sample_dissipativity(weights, quad, n_samples=200_000, seed=0)
print(f"max h1 = {rep.max_h1:.3e}, max h2 = {rep.max_h2:.3e}  "
      f"(<= 0 everywhere when the gain conditions hold)")
print("passed:", rep.passed)

print("\n== a gain set violating the condition is caught ==")
bad = sample_dissipativity(CostWeights(kv=0.2, kf=0.2), quad,
                           n_samples=200_000, seed=0)
print(f"kv*kf = 0.04: max h1 = {bad.max_h1:.3f} > 0 -> certificate fails:",
      not bad.passed)
