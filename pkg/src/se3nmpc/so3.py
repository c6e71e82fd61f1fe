"""SO(3) primitives: skew maps, Cayley and exponential maps, attitude error.

All rotations are plain 3x3 numpy arrays. Constructors validate membership;
`rotation_from_matrix` optionally projects near-rotations onto the group.
Everything here is a pure function on immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTH_TOL = 1e-9  # default SO(3) membership tolerance (Frobenius)


class NotSkewSymmetric(ValueError):
    """Matrix handed to unskew is not skew-symmetric within tolerance."""


class CayleySingular(ValueError):
    """Cayley inverse evaluated at (or too close to) a 180 degree rotation."""


class NotRotation(ValueError):
    """Matrix fails SO(3) membership validation."""


def skew(v):
    """Map v in R^3 to the skew-symmetric matrix S with S @ w = v x w."""
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def unskew(M, tol=1e-8):
    """Inverse of `skew`. Raises NotSkewSymmetric if M + M^T exceeds tol."""
    M = np.asarray(M, dtype=float)
    if np.linalg.norm(M + M.T, ord="fro") > tol:
        raise NotSkewSymmetric("matrix is not skew-symmetric within tolerance")
    return 0.5 * np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])


def cayley(v):
    """Cayley map R^3 -> SO(3): (I + S/2)(I - S/2)^{-1}.

    Evaluated in the equivalent closed form
    [(1 - |v|^2/4) I + S(v) + v v^T / 2] / (1 + |v|^2/4), an exact group
    member for any finite v (the denominator is the determinant of the
    inverted factor and never vanishes). Agrees with the exponential map to
    second order.
    """
    v = np.asarray(v, dtype=float)
    s = np.sum(v * v)
    S = skew(v)
    return ((1.0 - 0.25 * s) * np.eye(3) + S + 0.5 * np.outer(v, v)) / (1.0 + 0.25 * s)


def cayley_inverse(R, tol=1e-9):
    """Inverse Cayley map SO(3) -> R^3: 2 axial(R - R^T) / (1 + trace R).

    Singular at 180 degree rotations (trace = -1).
    """
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr + 1.0 < tol:
        raise CayleySingular("cayley inverse undefined near trace(R) = -1")
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return 2.0 * w / (1.0 + tr)


def expm_so3(v):
    """Exponential map R^3 -> SO(3) via the Rodrigues closed form.

    Falls back to the quadratic Taylor polynomial of the coefficients for
    |v| < 1e-6 to avoid 0/0.
    """
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v)
    S = skew(v)
    if theta < 1e-6:
        a = 1.0 - theta**2 / 6.0
        b = 0.5 - theta**2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * S + b * (S @ S)


def dcayley_inv_transposed(psi):
    """Body-frame inverse differential of the Cayley map, I + S(psi)/2 + psi psi^T/4.

    For M = cayley(psi) and a right perturbation M cay(eps*sigma), the preimage
    moves by d(psi) = dcayley_inv_transposed(psi) @ sigma. Used for shooting
    defect Jacobians.
    """
    psi = np.asarray(psi, dtype=float)
    return np.eye(3) + 0.5 * skew(psi) + 0.25 * np.outer(psi, psi)


def dcayley_body(v):
    """Body-frame differential of the Cayley map, (I - S(v)/2)/(1 + |v|^2/4).

    cayley(v + eps*w) = cayley(v) @ cayley(eps * dcayley_body(v) @ w) + O(eps^2).
    """
    v = np.asarray(v, dtype=float)
    return (np.eye(3) - 0.5 * skew(v)) / (1.0 + v @ v / 4.0)


def rotation_defect(R):
    """Frobenius distance of R^T R from the identity."""
    R = np.asarray(R, dtype=float)
    return np.linalg.norm(R.T @ R - np.eye(3), ord="fro")


def assert_rotation(R, tol=ORTH_TOL):
    """Validate SO(3) membership: orthonormality and det within tol of +1."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise NotRotation("rotation must be a finite 3x3 matrix")
    if rotation_defect(R) > tol:
        raise NotRotation(f"R^T R deviates from identity by more than {tol}")
    if abs(np.linalg.det(R) - 1.0) > max(tol, 1e-9):
        raise NotRotation("det(R) is not +1 within tolerance")
    return R


def project_to_so3(M):
    """Polar projection of a near-rotation onto SO(3) (closest in Frobenius)."""
    M = np.asarray(M, dtype=float)
    U, _, Vt = np.linalg.svd(M)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def rotation_from_matrix(M, orthonormalize=False, tol=ORTH_TOL):
    """Ingest a raw 3x3 matrix as a rotation.

    With orthonormalize=True the matrix is polar-projected first and the
    projection distance (Frobenius) is returned alongside; otherwise the
    matrix is validated as-is.
    """
    M = np.asarray(M, dtype=float)
    if orthonormalize:
        R = project_to_so3(M)
        return assert_rotation(R, tol), float(np.linalg.norm(R - M, ord="fro"))
    return assert_rotation(M, tol)


@dataclass(frozen=True)
class AttitudeErrorWeights:
    """Weights and axes for the attitude error: positive k1, k2 and two
    orthogonal unit vectors e1, e2."""

    k1: float = 10.0
    k2: float = 1.0
    e1: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    e2: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "e1", np.asarray(self.e1, dtype=float))
        object.__setattr__(self, "e2", np.asarray(self.e2, dtype=float))
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError("attitude weights k1, k2 must be positive")
        if abs(np.linalg.norm(self.e1) - 1.0) > 1e-12 or abs(np.linalg.norm(self.e2) - 1.0) > 1e-12:
            raise ValueError("e1 and e2 must be unit vectors")
        if abs(self.e1 @ self.e2) > 1e-12:
            raise ValueError("e1 and e2 must be orthogonal")


def attitude_error(R, Rd, w: AttitudeErrorWeights):
    """Configuration error k1*(1 - Re1 . Rd e1) + k2*(1 - Re2 . Rd e2).

    Non-negative, and zero exactly when R = Rd.
    """
    R = np.asarray(R, dtype=float)
    Rd = np.asarray(Rd, dtype=float)
    p1 = 1.0 - (R @ w.e1) @ (Rd @ w.e1)
    p2 = 1.0 - (R @ w.e2) @ (Rd @ w.e2)
    return w.k1 * p1 + w.k2 * p2


def attitude_error_gradient(R, Rd, w: AttitudeErrorWeights):
    """Gradient of `attitude_error` w.r.t. a body-frame tangent of R.

    d/deps attitude_error(R @ cayley(eps*u), Rd) = gradient . u at eps = 0.
    """
    R = np.asarray(R, dtype=float)
    Rd = np.asarray(Rd, dtype=float)
    g = -w.k1 * np.cross(w.e1, R.T @ (Rd @ w.e1))
    g -= w.k2 * np.cross(w.e2, R.T @ (Rd @ w.e2))
    return g
