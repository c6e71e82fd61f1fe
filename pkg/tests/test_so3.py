import numpy as np
import pytest

from se3nmpc import (AttitudeErrorWeights, CayleySingular, NotRotation,
                     NotSkewSymmetric, attitude_error,
                     attitude_error_gradient, cayley, cayley_inverse,
                     expm_so3, project_to_so3, rotation_from_matrix, skew,
                     unskew)

from conftest import random_rotations


def test_skew_zero():
    assert np.array_equal(skew([0.0, 0.0, 0.0]), np.zeros((3, 3)))


def test_skew_canonical_basis():
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert np.array_equal(skew([0.0, 0.0, 1.0]), expected)


def test_skew_matches_cross_product(rng):
    for _ in range(200):
        v, w = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(skew(v) @ w, np.cross(v, w), atol=1e-14)


def test_skew_exactly_antisymmetric(rng):
    for _ in range(200):
        S = skew(rng.normal(scale=100.0, size=3))
        assert np.array_equal(S + S.T, np.zeros((3, 3)))


def test_unskew_zero():
    assert np.array_equal(unskew(np.zeros((3, 3))), np.zeros(3))


def test_unskew_round_trip():
    v = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(unskew(skew(v)), v)


def test_unskew_rejects_symmetric():
    with pytest.raises(NotSkewSymmetric):
        unskew(np.diag([1.0, 2.0, 3.0]))


def test_cayley_identity():
    assert np.allclose(cayley(np.zeros(3)), np.eye(3), atol=0.0)


def test_cayley_matches_exponential_near_identity():
    v = np.array([0.0, 0.0, 1e-3])
    assert np.linalg.norm(cayley(v) - expm_so3(v), ord="fro") <= 1e-9


def test_cayley_orthogonality(rng):
    for _ in range(300):
        R = cayley(rng.normal(scale=2.0, size=3))
        assert np.linalg.norm(R.T @ R - np.eye(3), ord="fro") <= 1e-12
        assert abs(np.linalg.det(R) - 1.0) <= 1e-12


def test_cayley_exponential_agreement_is_third_order(rng):
    # error at step h scales like h^3: log-slope of the error across decades
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    errs = []
    for h in (1e-1, 1e-2, 1e-3):
        v = h * axis
        errs.append(np.linalg.norm(cayley(v) - expm_so3(v), ord="fro"))
    slope1 = np.log10(errs[0] / errs[1])
    slope2 = np.log10(errs[1] / errs[2])
    assert 2.8 <= slope1 <= 3.2
    assert 2.8 <= slope2 <= 3.2


def test_expm_identity():
    assert np.array_equal(expm_so3(np.zeros(3)), np.eye(3))


def test_expm_quarter_turn_about_z():
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.allclose(expm_so3([0.0, 0.0, np.pi / 2]), expected, atol=1e-15)


def test_expm_trace_identity(rng):
    for _ in range(300):
        v = rng.normal(scale=1.5, size=3)
        R = expm_so3(v)
        assert abs(np.trace(R) - (1.0 + 2.0 * np.cos(np.linalg.norm(v)))) <= 1e-12


def test_expm_small_angle_fallback_is_continuous():
    for theta in (9e-7, 1.1e-6):
        v = np.array([theta, 0.0, 0.0])
        assert np.linalg.norm(expm_so3(v) - cayley(v), ord="fro") <= 1e-15


def test_cayley_inverse_identity():
    assert np.array_equal(cayley_inverse(np.eye(3)), np.zeros(3))


def test_cayley_inverse_round_trip():
    v = np.array([0.1, -0.2, 0.3])
    assert np.allclose(cayley_inverse(cayley(v)), v, atol=1e-10)


def test_cayley_inverse_round_trip_random(rng):
    for _ in range(300):
        v = rng.normal(size=3)
        v *= rng.random() / max(np.linalg.norm(v), 1e-12)  # |v| < 1
        assert np.allclose(cayley_inverse(cayley(v)), v, atol=1e-10)


def test_cayley_inverse_singular_at_half_turn():
    R = expm_so3([np.pi, 0.0, 0.0])
    with pytest.raises(CayleySingular):
        cayley_inverse(R)


def test_attitude_error_zero_at_coincidence(rng):
    w = AttitudeErrorWeights()
    for R in random_rotations(20, seed=3):
        assert abs(attitude_error(R, R, w)) <= 1e-14


def test_attitude_error_half_turn_about_e1():
    w = AttitudeErrorWeights(k1=1.0, k2=1.0)
    R = expm_so3([np.pi, 0.0, 0.0])  # e1 fixed, e2 flipped
    assert abs(attitude_error(R, np.eye(3), w) - 2.0) <= 1e-12


def test_attitude_error_quarter_turn_about_z():
    w = AttitudeErrorWeights(k1=10.0, k2=1.0)
    R = expm_so3([0.0, 0.0, np.pi / 2])
    assert abs(attitude_error(R, np.eye(3), w) - 11.0) <= 1e-12


def test_attitude_error_nonnegative_and_definite():
    # vectorized over 1e5 random pairs with the same formula, spot-checked
    # against the scalar function
    w = AttitudeErrorWeights(k1=10.0, k2=1.0)
    n = 10**5
    Ra = random_rotations(n, seed=11)
    Rb = random_rotations(n, seed=12)
    p1 = 1.0 - np.einsum("nij,nij->n", Ra[:, :, 0:1], Rb[:, :, 0:1])
    p2 = 1.0 - np.einsum("nij,nij->n", Ra[:, :, 1:2], Rb[:, :, 1:2])
    psi = w.k1 * p1 + w.k2 * p2
    assert np.all(psi >= 0.0)
    assert np.all(psi[np.linalg.norm(Ra - Rb, axis=(1, 2)) >= 1e-12] > 0.0)
    for k in range(0, n, n // 50):
        assert abs(attitude_error(Ra[k], Rb[k], w) - psi[k]) <= 1e-12


def test_attitude_error_gradient_matches_finite_differences(rng):
    w = AttitudeErrorWeights(k1=10.0, k2=1.0)
    eps = 1e-7
    for R, Rd in zip(random_rotations(10, seed=5), random_rotations(10, seed=6)):
        g = attitude_error_gradient(R, Rd, w)
        for k in range(3):
            dv = np.zeros(3)
            dv[k] = eps
            num = (attitude_error(R @ cayley(dv), Rd, w)
                   - attitude_error(R @ cayley(-dv), Rd, w)) / (2 * eps)
            assert abs(num - g[k]) <= 1e-6


def test_weights_validation():
    with pytest.raises(ValueError):
        AttitudeErrorWeights(k1=0.0)
    with pytest.raises(ValueError):
        AttitudeErrorWeights(e1=np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        AttitudeErrorWeights(e1=np.array([1.0, 0.0, 0.0]), e2=np.array([1.0, 0.0, 0.0]))


def test_rotation_validation_and_projection():
    near = np.array([
        [0.1543, 0.9880, 0.0],
        [0.1954, -0.0305, -0.9802],
        [-0.9685, 0.1512, -0.1978],
    ])
    with pytest.raises(NotRotation):
        rotation_from_matrix(near)
    R, dist = rotation_from_matrix(near, orthonormalize=True)
    assert np.linalg.norm(R.T @ R - np.eye(3), ord="fro") <= 1e-12
    assert 0.0 < dist < 1e-3
    # projection is idempotent
    assert np.allclose(project_to_so3(R), R, atol=1e-12)
