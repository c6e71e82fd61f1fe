"""Executable certificates: linearization, N-step controllability rank,
storage function, and strict-dissipativity residuals.

These routines turn the premises of the closed-loop stability argument into
numeric checks: the gain products kv*kf and komega*ktau against 0.25, the
rank of the four-step controllability matrix of the zero-order-hold
linearization, and sampled maxima of the dissipation residuals h1, h2 (and
their exponent-weighted variants h3, h4, evaluated at exponent zero, which is
the worst case because the weight is >= 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .dynamics import ControlInput, QuadrotorParams, RigidBodyParams, RigidState, total_force
from .ocp import CostWeights, OcpSpec
from .so3 import skew

GAIN_THRESHOLD = 0.25
RANK_TOL = 1e-8  # relative singular-value threshold


@dataclass
class LinearizedModel:
    """Continuous (A, B) and, after discretization, ZOH (Ad, Bd) matrices.

    State ordering (d_xi, d_v, eta, d_omega) with eta the body tangent of the
    rotation (R perturbed as R expm(S(eta))).
    """

    A: np.ndarray
    B: np.ndarray
    dt: float
    x: RigidState
    u: ControlInput
    Ad: np.ndarray | None = None
    Bd: np.ndarray | None = None


def linearize(x: RigidState, u: ControlInput, p: RigidBodyParams, dt: float) -> LinearizedModel:
    """Continuous-time linearization on the tangent space.

    Nonzero blocks:
      A[0:3, 3:6]   = I
      A[3:6, 6:9]   = -(T/m) R S(e_b)
      A[6:9, 6:9]   = -S(omega);  A[6:9, 9:12] = I
      A[9:12, 9:12] = J^-1 (S(J omega) - S(omega) J)
      B[3:6, 0]     = R e_b / m;  B[9:12, 1:4] = J^-1
    """
    A = np.zeros((12, 12))
    B = np.zeros((12, 4))
    J, Jinv = p.inertia, p.inertia_inv
    A[0:3, 3:6] = np.eye(3)
    A[3:6, 6:9] = -(u.thrust / p.mass) * x.R @ skew(p.thrust_axis)
    A[6:9, 6:9] = -skew(x.omega)
    A[6:9, 9:12] = np.eye(3)
    A[9:12, 9:12] = Jinv @ (skew(J @ x.omega) - skew(x.omega) @ J)
    B[3:6, 0] = x.R @ p.thrust_axis / p.mass
    B[9:12, 1:4] = Jinv
    return LinearizedModel(A=A, B=B, dt=dt, x=x, u=u)


def discretize_linear(m: LinearizedModel) -> LinearizedModel:
    """Fill in the zero-order-hold pair Ad = e^{A dt}, Bd = (int e^{A s} ds) B
    via the augmented-matrix exponential."""
    if not m.dt > 0:
        raise ValueError("dt must be positive")
    n = m.A.shape[0]
    nu = m.B.shape[1]
    aug = np.zeros((n + nu, n + nu))
    aug[:n, :n] = m.A
    aug[:n, n:] = m.B
    E = expm(aug * m.dt)
    m.Ad = E[:n, :n]
    m.Bd = E[:n, n:]
    return m


def controllability_matrix(m: LinearizedModel, steps: int) -> np.ndarray:
    """[Ad^{steps-1} Bd ... Ad Bd Bd], shape (12, 4*steps)."""
    if m.Ad is None or m.Bd is None:
        raise ValueError("model must be discretized first")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    blocks = []
    P = m.Bd
    for _ in range(steps):
        blocks.append(P)
        P = m.Ad @ P
    return np.hstack(blocks[::-1])


def controllability_rank(m: LinearizedModel, steps: int, rank_tol: float = RANK_TOL) -> int:
    """Numerical rank of the N-step controllability matrix (relative SVD cut)."""
    sv = np.linalg.svd(controllability_matrix(m, steps), compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rank_tol * sv[0]))


def storage_function(x: RigidState, p: RigidBodyParams) -> float:
    """Mechanical Lagrangian 1/2 w^T J w + 1/2 m |v|^2 - m g xi_3.

    The translational kinetic term carries the mass so that the kinetic part
    differentiates to the mechanical power w.tau + v.f along trajectories;
    the potential m g xi_3 is included for diagnostics only (the dissipation
    residuals below do not depend on it).
    """
    return kinetic_energy(x, p) - p.mass * p.gravity * x.xi[2]


def kinetic_energy(x: RigidState, p: RigidBodyParams) -> float:
    return float(0.5 * x.omega @ (p.inertia @ x.omega) + 0.5 * p.mass * x.v @ x.v)


def dissipativity_residuals(x: RigidState, u: ControlInput, spec: OcpSpec,
                            p: RigidBodyParams):
    """(h1, h2) with h1 = v.f - kv|v|^2 - kf|f|^2 and
    h2 = w.tau - kw|w|^2 - kt|tau|^2.

    Both are <= 0 everywhere whenever kv*kf >= 0.25 and komega*ktau >= 0.25.
    The exponent-weighted variants (h3, h4) coincide with (h1, h2) at
    exponent zero, their worst case for any zeta >= 1.
    """
    w = spec.weights
    f = total_force(x, u, p)
    h1 = x.v @ f - w.kv * x.v @ x.v - w.kf * f @ f
    h2 = x.omega @ u.torque - w.komega * x.omega @ x.omega - w.ktau * u.torque @ u.torque
    return float(h1), float(h2)


@dataclass(frozen=True)
class GainCheck:
    kv_kf: float
    komega_ktau: float
    threshold: float = GAIN_THRESHOLD

    @property
    def margins(self):
        return self.kv_kf - self.threshold, self.komega_ktau - self.threshold

    @property
    def translational_ok(self):
        return self.kv_kf >= self.threshold

    @property
    def rotational_ok(self):
        return self.komega_ktau >= self.threshold

    @property
    def passed(self):
        return self.translational_ok and self.rotational_ok

    def as_dict(self):
        return {
            "kv_kf": self.kv_kf,
            "komega_ktau": self.komega_ktau,
            "threshold": self.threshold,
            "margins": list(self.margins),
            "passed": bool(self.passed),
        }


def check_gain_conditions(w: CostWeights) -> GainCheck:
    """Boundary-inclusive check of kv*kf >= 0.25 and komega*ktau >= 0.25."""
    kvkf, kwkt = w.gain_products
    return GainCheck(kv_kf=kvkf, komega_ktau=kwkt)


@dataclass(frozen=True)
class DissipativityReport:
    """Sampled maxima of the dissipation residuals plus the gain check."""

    n_samples: int
    max_h1: float
    max_h2: float
    max_h3: float
    max_h4: float
    gain_check: GainCheck
    slack: float = 1e-9
    seed: int = 0

    @property
    def passed(self):
        return max(self.max_h1, self.max_h2, self.max_h3, self.max_h4) <= self.slack

    def as_dict(self):
        return {
            "n_samples": self.n_samples,
            "max_h1": self.max_h1,
            "max_h2": self.max_h2,
            "max_h3": self.max_h3,
            "max_h4": self.max_h4,
            "slack": self.slack,
            "seed": self.seed,
            "passed": bool(self.passed),
            "gain_check": self.gain_check.as_dict(),
        }


def sample_dissipativity(weights: CostWeights, quad: QuadrotorParams,
                         n_samples: int = 10**6, seed: int = 0,
                         v_max: float = 10.0, omega_max: float = 10.0) -> DissipativityReport:
    """Vectorized sampled maxima of h1 and h2 over the admissible set.

    Samples: velocity and angular velocity uniform in balls of the given
    radii, thrust uniform in [0, 4*rotor_max] along a uniform direction on
    the sphere (the image of the attitude sphere), torque uniform in the box
    the rotor limits allow through the mixing map. Includes aligned
    worst-case pairs (v parallel to f, omega parallel to tau) so violations
    of the gain conditions are actually exposed.
    """
    rng = np.random.default_rng(seed)
    p = quad.body
    n = int(n_samples)

    def ball(nm, radius):
        raw = rng.normal(size=(nm, 3))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        r = radius * rng.random(nm) ** (1.0 / 3.0)
        return raw * r[:, None]

    v = ball(n, v_max)
    om = ball(n, omega_max)
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    T = rng.uniform(0.0, 4.0 * quad.rotor_max, size=n)
    f = direction * T[:, None] - p.mass * p.gravity * np.array([0.0, 0.0, 1.0])
    tau_max = np.array([
        quad.arm_length * quad.rotor_max,
        quad.arm_length * quad.rotor_max,
        2.0 * quad.torque_coeff * quad.rotor_max,
    ])
    tau = rng.uniform(-1.0, 1.0, size=(n, 3)) * tau_max

    # worst-case alignment slice: v parallel to f, omega parallel to tau
    k = max(n // 100, 1)
    fk = f[:k]
    v[:k] = fk / np.maximum(np.linalg.norm(fk, axis=1, keepdims=True), 1e-12) \
        * (v_max * rng.random((k, 1)))
    tk = tau[:k]
    om[:k] = tk / np.maximum(np.linalg.norm(tk, axis=1, keepdims=True), 1e-12) \
        * (omega_max * rng.random((k, 1)))

    h1 = np.sum(v * f, axis=1) - weights.kv * np.sum(v * v, axis=1) \
        - weights.kf * np.sum(f * f, axis=1)
    h2 = np.sum(om * tau, axis=1) - weights.komega * np.sum(om * om, axis=1) \
        - weights.ktau * np.sum(tau * tau, axis=1)
    max_h1 = float(np.max(h1))
    max_h2 = float(np.max(h2))
    return DissipativityReport(
        n_samples=n, max_h1=max_h1, max_h2=max_h2,
        max_h3=max_h1, max_h4=max_h2,
        gain_check=check_gain_conditions(weights), seed=seed,
    )


@dataclass(frozen=True)
class RankCertificate:
    steps: int
    rank_at_equilibrium: int
    rank_short_horizon: int  # at steps - 1, expected deficient
    n_random_states: int
    min_rank_random: int
    required: int = 12
    seed: int = 0

    @property
    def passed(self):
        return (self.rank_at_equilibrium >= self.required
                and self.min_rank_random >= self.required)

    def as_dict(self):
        return {
            "steps": self.steps,
            "rank_at_equilibrium": self.rank_at_equilibrium,
            "rank_short_horizon": self.rank_short_horizon,
            "n_random_states": self.n_random_states,
            "min_rank_random": self.min_rank_random,
            "required": self.required,
            "seed": self.seed,
            "passed": bool(self.passed),
        }


def random_admissible_states(quad: QuadrotorParams, n: int, seed: int = 0,
                             v_max: float = 10.0, omega_max: float = 10.0):
    """Sample (state, input) pairs from the interior of the admissible set.

    Attitudes are uniform on SO(3); thrust is kept within [0.2, 2] m g (away
    from the zero-thrust boundary, where the attitude-to-translation coupling
    of the linearization degenerates); torque within the mixing image.
    """
    from scipy.spatial.transform import Rotation

    rng = np.random.default_rng(seed)
    p = quad.body
    Rs = Rotation.random(n, random_state=np.random.RandomState(seed)).as_matrix()
    out = []
    tau_max = np.array([
        quad.arm_length * quad.rotor_max,
        quad.arm_length * quad.rotor_max,
        2.0 * quad.torque_coeff * quad.rotor_max,
    ])
    for i in range(n):
        x = RigidState(
            R=Rs[i],
            xi=rng.uniform(-10, 10, 3),
            omega=rng.uniform(-omega_max, omega_max, 3),
            v=rng.uniform(-v_max, v_max, 3),
        )
        u = ControlInput(
            thrust=rng.uniform(0.2, 2.0) * p.hover_thrust,
            torque=rng.uniform(-1.0, 1.0, 3) * tau_max,
        )
        out.append((x, u))
    return out


def certify_controllability(quad: QuadrotorParams, dt: float, steps: int = 4,
                            n_random: int = 100, seed: int = 0,
                            equilibrium_input: ControlInput | None = None) -> RankCertificate:
    """Rank certificate at hover plus sampled random admissible states."""
    p = quad.body
    hover = RigidState(R=np.eye(3), xi=np.zeros(3), omega=np.zeros(3), v=np.zeros(3))
    u_e = equilibrium_input or ControlInput(thrust=p.hover_thrust, torque=np.zeros(3))
    m = discretize_linear(linearize(hover, u_e, p, dt))
    rank_eq = controllability_rank(m, steps)
    rank_short = controllability_rank(m, steps - 1) if steps > 1 else 0
    min_rank = rank_eq
    for x, u in random_admissible_states(quad, n_random, seed=seed):
        mi = discretize_linear(linearize(x, u, p, dt))
        min_rank = min(min_rank, controllability_rank(mi, steps))
    return RankCertificate(
        steps=steps,
        rank_at_equilibrium=rank_eq,
        rank_short_horizon=rank_short,
        n_random_states=n_random,
        min_rank_random=min_rank,
        seed=seed,
    )
