"""Rotation primitives: skew maps, Cayley vs exponential, attitude error.

Run:  python demos/01_rotations_and_maps.py
"""

import numpy as np

from se3nmpc import (AttitudeErrorWeights, attitude_error, cayley,
                     cayley_inverse, expm_so3, skew, unskew)

rng = np.random.default_rng(0)

print("== skew / unskew ==")
v = np.array([0.3, -1.2, 0.7])
S = skew(v)
print("skew(v) @ w equals v x w:",
      np.allclose(S @ [1.0, 2.0, 3.0], np.cross(v, [1.0, 2.0, 3.0])))
print("round trip unskew(skew(v)) - v:", unskew(S) - v)

print("\n== Cayley map stays exactly on SO(3) ==")
for scale in (0.1, 1.0, 10.0):
    w = rng.normal(scale=scale, size=3)
    R = cayley(w)
    print(f"|v|={np.linalg.norm(w):7.3f}  "
          f"|R^T R - I|_F = {np.linalg.norm(R.T @ R - np.eye(3)):.2e}  "
          f"det R = {np.linalg.det(R):.12f}")

print("\n== Cayley agrees with the exponential to second order ==")
for h in (1e-1, 1e-2, 1e-3):
    w = np.array([0.0, 0.0, h])
    err = np.linalg.norm(cayley(w) - expm_so3(w), ord="fro")
    print(f"h = {h:g}: |cay - exp|_F = {err:.3e}  (err/h^3 = {err / h**3:.3f})")

print("\n== Inverse Cayley round trip ==")
w = np.array([0.1, -0.2, 0.3])
print("cayley_inverse(cayley(v)) - v:", cayley_inverse(cayley(w)) - w)

print("\n== Attitude error ==")
weights = AttitudeErrorWeights(k1=10.0, k2=1.0)
quarter_turn = expm_so3([0.0, 0.0, np.pi / 2])
upside_down = expm_so3([np.pi, 0.0, 0.0])
print("Psi(I, I)           =", attitude_error(np.eye(3), np.eye(3), weights))
print("Psi(quarter turn z) =", attitude_error(quarter_turn, np.eye(3), weights))
print("Psi(upside down)    =", attitude_error(upside_down, np.eye(3), weights))
