"""Direct multiple-shooting transcription and an SQP-type solver.

Transcription: node states and piecewise-constant controls are decision
variables; consecutive nodes are coupled by 12 defect residuals per interval
(position, velocity, a Lie-algebra rotation defect through the inverse
Cayley map, and angular velocity). Rotations are parameterized locally,
R_i = Rhat_i @ cayley(delta_i), and the references Rhat_i are re-anchored
after every accepted step so the linearization always happens at delta = 0
and the inverse Cayley map stays far from its 180-degree singularity.

Solver: Gauss-Newton SQP. Each iteration linearizes the defects, builds the
Gauss-Newton model of the stage cost (exact for the quadratic input terms),
eliminates the state increments through the shooting recursion (condensing),
and solves the remaining dense control-space QP with a primal active-set
method started at the current (always feasible) controls. Steps are globalized
with a backtracking line search on an l1 merit function. Rotor-force bounds
enter as linear inequalities through the inverse mixing map, so every iterate
satisfies them exactly.

All derivatives are analytic; `defect_jacobians` and `cost_gradient` expose
them for finite-difference verification.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve

from .dynamics import ControlInput, QuadrotorParams, RigidState
from .integrator import step_predictor
from .ocp import OcpSpec
from .so3 import skew

_EYE3 = np.eye(3)


class SolveStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 50
    max_iterations_warm: int = 15
    feas_tol: float = 1e-6
    opt_tol: float = 1e-4
    levenberg: float = 1e-8
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 25
    qp_tol: float = 1e-10
    max_qp_iterations: int = 300

    def __post_init__(self):
        if self.feas_tol <= 0 or self.opt_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class ShootingProblem:
    """Transcribed NLP: initial state, spec, vehicle, and the current guess.

    Guess arrays: R (N+1,3,3), xi/v/om (N+1,3), u (N,4). Node 0 always equals
    the pinned initial state x0 and is not a decision variable; there are
    12*N defect equations and 4*N control unknowns.
    """

    x0: RigidState
    spec: OcpSpec
    quad: QuadrotorParams
    R: np.ndarray = None
    xi: np.ndarray = None
    v: np.ndarray = None
    om: np.ndarray = None
    u: np.ndarray = None

    @property
    def horizon(self):
        return self.spec.horizon

    def set_guess(self, R, xi, v, om, u):
        N = self.horizon
        assert R.shape == (N + 1, 3, 3) and u.shape == (N, 4)
        self.R, self.xi, self.v, self.om, self.u = (
            R.copy(), xi.copy(), v.copy(), om.copy(), u.copy())
        self._pin_initial()

    def _pin_initial(self):
        self.R[0] = self.x0.R
        self.xi[0] = self.x0.xi
        self.v[0] = self.x0.v
        self.om[0] = self.x0.omega


@dataclass(frozen=True)
class SolveResult:
    """Optimal control sequence, predicted trajectory, and solve statistics."""

    us: np.ndarray            # (N, 4) rows (T, tau_x, tau_y, tau_z)
    R: np.ndarray             # (N+1, 3, 3)
    xi: np.ndarray            # (N+1, 3)
    v: np.ndarray             # (N+1, 3)
    om: np.ndarray            # (N+1, 3)
    objective: float
    iterations: int
    status: SolveStatus
    max_defect: float
    kkt_residual: float
    solve_time: float
    active_set: tuple = ()    # rotor-bound rows active at the solution

    @property
    def first_control(self) -> ControlInput:
        return ControlInput(thrust=self.us[0, 0], torque=self.us[0, 1:])

    def controls(self):
        return [ControlInput(thrust=row[0], torque=row[1:]) for row in self.us]

    def predicted_states(self):
        return [
            RigidState(R=self.R[j], xi=self.xi[j], omega=self.om[j], v=self.v[j])
            for j in range(self.R.shape[0])
        ]


@dataclass(frozen=True)
class InitialGuess:
    R: np.ndarray
    xi: np.ndarray
    v: np.ndarray
    om: np.ndarray
    u: np.ndarray
    active_set: tuple = ()


# ---------------------------------------------------------------------------
# batched SO(3) helpers (leading axis = shooting interval)
# ---------------------------------------------------------------------------

def _bskew(v):
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def _bcay(v):
    # cay(v) = [(1 - |v|^2/4) I + S(v) + v v^T / 2] / (1 + |v|^2/4)
    s = np.sum(v * v, axis=-1)[..., None, None]
    S = _bskew(v)
    outer = v[..., :, None] * v[..., None, :]
    return ((1.0 - 0.25 * s) * _EYE3 + S + 0.5 * outer) / (1.0 + 0.25 * s)


def _bcay_inv(R):
    # closed form: 2/(1 + trace R) * axial(R - R^T); singular at trace = -1
    tr = np.trace(R, axis1=-2, axis2=-1)
    if np.any(tr + 1.0 < 1e-9):
        raise _RotationDefectTooLarge()
    w = np.stack([
        R[..., 2, 1] - R[..., 1, 2],
        R[..., 0, 2] - R[..., 2, 0],
        R[..., 1, 0] - R[..., 0, 1],
    ], axis=-1)
    return 2.0 * w / (1.0 + tr)[..., None]


def _bdcayinv_T(psi):
    # I + S(psi)/2 + psi psi^T / 4  (inverse body differential of cay at psi)
    return _EYE3 + 0.5 * _bskew(psi) + 0.25 * psi[..., :, None] * psi[..., None, :]


def _bdcay_body(v):
    # (I - S(v)/2) / (1 + |v|^2/4)
    s = np.sum(v * v, axis=-1)[..., None, None]
    return (_EYE3 - 0.5 * _bskew(v)) / (1.0 + 0.25 * s)


class _RotationDefectTooLarge(Exception):
    """Trial iterate produced a defect rotation near 180 degrees."""


# ---------------------------------------------------------------------------
# transcription
# ---------------------------------------------------------------------------

def transcribe(x0: RigidState, spec: OcpSpec, quad: QuadrotorParams,
               guess: InitialGuess | None = None) -> ShootingProblem:
    """Build the shooting problem, cold-started unless a guess is given.

    Cold start: controls at hover (clipped into the rotor box), node states by
    rolling out the prediction model, which makes the initial guess
    dynamically feasible (all defects zero).
    """
    prob = ShootingProblem(x0=x0, spec=spec, quad=quad)
    N = spec.horizon
    if guess is not None:
        prob.set_guess(guess.R, guess.xi, guess.v, guess.om, guess.u)
        prob.u = _clip_controls(prob.u, spec, quad)
        return prob

    p = quad.body
    u_hover = np.concatenate(([p.hover_thrust], np.zeros(3)))
    u = np.tile(u_hover, (N, 1))
    u = _clip_controls(u, spec, quad)
    R = np.empty((N + 1, 3, 3))
    xi = np.empty((N + 1, 3))
    v = np.empty((N + 1, 3))
    om = np.empty((N + 1, 3))
    state = x0
    R[0], xi[0], v[0], om[0] = state.R, state.xi, state.v, state.omega
    for j in range(N):
        state = step_predictor(state, ControlInput(thrust=u[j, 0], torque=u[j, 1:]), p, spec.dt)
        R[j + 1], xi[j + 1], v[j + 1], om[j + 1] = state.R, state.xi, state.v, state.omega
    prob.set_guess(R, xi, v, om, u)
    return prob


def _clip_controls(u, spec: OcpSpec, quad: QuadrotorParams):
    lo, hi = spec.rotor_bounds
    f = u @ quad.mixing_inverse.T
    return np.clip(f, lo, hi) @ quad.mixing_matrix.T


def shift_warm_start(prev: SolveResult, spec: OcpSpec,
                     quad: QuadrotorParams) -> InitialGuess:
    """Receding-horizon shift: drop stage 0, duplicate the last control, and
    re-propagate the final node with the prediction model. The rotor-bound
    active set shifts one interval with the controls (8 rows per interval;
    the duplicated last control keeps its rows)."""
    N = spec.horizon
    u = np.vstack([prev.us[1:], prev.us[-1:]])
    R = np.empty_like(prev.R)
    xi = np.empty_like(prev.xi)
    v = np.empty_like(prev.v)
    om = np.empty_like(prev.om)
    R[:-1], xi[:-1], v[:-1], om[:-1] = prev.R[1:], prev.xi[1:], prev.v[1:], prev.om[1:]
    last = RigidState(R=prev.R[N], xi=prev.xi[N], omega=prev.om[N], v=prev.v[N])
    nxt = step_predictor(last, ControlInput(thrust=u[-1, 0], torque=u[-1, 1:]),
                         quad.body, spec.dt)
    R[-1], xi[-1], v[-1], om[-1] = nxt.R, nxt.xi, nxt.v, nxt.omega
    shifted = {r - 8 for r in prev.active_set if r >= 8}
    shifted |= {r for r in prev.active_set if r >= 8 * (N - 1)}
    return InitialGuess(R=R, xi=xi, v=v, om=om, u=u,
                        active_set=tuple(sorted(shifted)))


# ---------------------------------------------------------------------------
# evaluation on stacked iterates
# ---------------------------------------------------------------------------

def _predict_nodes(R, xi, v, om, u, spec: OcpSpec, quad: QuadrotorParams):
    """Vectorized prediction of every interval start, matching step_predictor."""
    p = quad.body
    dt = spec.dt
    J, Jinv, axis = p.inertia, p.inertia_inv, p.thrust_axis
    T = u[:, 0]
    tau = u[:, 1:]
    Rj, xij, vj, omj = R[:-1], xi[:-1], v[:-1], om[:-1]

    thrust_dir = Rj @ axis
    f = thrust_dir * T[:, None] - p.mass * p.gravity * np.array([0.0, 0.0, 1.0])
    xi_pred = xij + dt * vj
    v_pred = vj + dt * f / p.mass
    alpha = np.cross(omj @ J.T, omj) + tau
    half = 0.5 * dt * (alpha @ Jinv.T)
    om_mid = omj + half
    nu = dt * om_mid
    R_pred = Rj @ _bcay(nu)
    om_pred = om_mid + half
    return R_pred, xi_pred, v_pred, om_pred, nu, f, thrust_dir


def eval_defects(prob: ShootingProblem):
    """Defect residuals (N, 12): rows (xi, v, rotation, omega) per interval."""
    R_pred, xi_pred, v_pred, om_pred, _, _, _ = _predict_nodes(
        prob.R, prob.xi, prob.v, prob.om, prob.u, prob.spec, prob.quad)
    psi = _bcay_inv(np.swapaxes(R_pred, -1, -2) @ prob.R[1:])
    return np.concatenate(
        [prob.xi[1:] - xi_pred, prob.v[1:] - v_pred, psi, prob.om[1:] - om_pred],
        axis=1,
    )


def eval_objective(prob: ShootingProblem):
    """Horizon objective on the current guess (identical to the stagewise sum)."""
    spec, w = prob.spec, prob.spec.weights
    p = prob.quad.body
    N = spec.horizon
    zj = spec.zeta ** np.arange(N + 1)
    att = w.attitude
    e1d = spec.equilibrium.R_d @ att.e1
    e2d = spec.equilibrium.R_d @ att.e2
    psi = att.k1 * (1.0 - (prob.R @ att.e1) @ e1d) + att.k2 * (1.0 - (prob.R @ att.e2) @ e2d)
    exi = prob.xi - spec.equilibrium.xi_e
    ev = prob.v - spec.equilibrium.v_e
    eo = prob.om - spec.equilibrium.omega_e
    state_term = (
        w.kp * np.sum(exi * exi, axis=1)
        + w.kv * np.sum(ev * ev, axis=1)
        + w.komega * np.sum(eo * eo, axis=1)
        + w.kR * psi**2
    )
    f = (prob.R[:-1] @ p.thrust_axis) * prob.u[:, 0:1] \
        - p.mass * p.gravity * np.array([0.0, 0.0, 1.0])
    input_term = w.kf * np.sum(f * f, axis=1) + w.ktau * np.sum(prob.u[:, 1:] ** 2, axis=1)
    return float(zj @ state_term + np.sum(input_term))


def defect_jacobians(prob: ShootingProblem):
    """Analytic Jacobians (F, G, E) of the interval defects.

    Local coordinates per node are (dxi, dv, delta, domega) with rotations
    perturbed on the right, R -> R @ cayley(delta). Shapes: F, E (N, 12, 12)
    w.r.t. nodes j and j+1, G (N, 12, 4) w.r.t. the interval control.
    """
    spec, quad = prob.spec, prob.quad
    p = quad.body
    dt = spec.dt
    N = spec.horizon
    J, Jinv, axis = p.inertia, p.inertia_inv, p.thrust_axis

    R_pred, _, _, _, nu, _, _ = _predict_nodes(
        prob.R, prob.xi, prob.v, prob.om, prob.u, spec, quad)
    Rj, Rj1 = prob.R[:-1], prob.R[1:]
    omj = prob.om[:-1]
    T = prob.u[:, 0]

    M = np.swapaxes(R_pred, -1, -2) @ Rj1
    psi = _bcay_inv(M)
    Dpsi = _bdcayinv_T(psi)                      # d psi / d (right perturbation of M)
    Gmat = np.swapaxes(Rj, -1, -2) @ Rj1         # R_j^T R_{j+1}
    Dnu = _bdcay_body(nu)
    # angular-rate sensitivity of alpha = (J w) x w + tau
    Somj = _bskew(omj)
    SJomj = _bskew(omj @ J.T)
    dalpha = SJomj - Somj @ J
    Komega = dt * (_EYE3 + (0.5 * dt) * np.einsum("ab,nbc->nac", Jinv, dalpha))
    MT_Dnu = np.swapaxes(M, -1, -2) @ Dnu

    F = np.zeros((N, 12, 12))
    G = np.zeros((N, 12, 4))
    E = np.zeros((N, 12, 12))

    # position rows
    F[:, 0:3, 0:3] = -_EYE3
    F[:, 0:3, 3:6] = -dt * _EYE3
    E[:, 0:3, 0:3] = _EYE3
    # velocity rows
    F[:, 3:6, 3:6] = -_EYE3
    F[:, 3:6, 6:9] = (dt / p.mass) * T[:, None, None] * (Rj @ skew(axis))
    G[:, 3:6, 0] = -(dt / p.mass) * (Rj @ axis)
    E[:, 3:6, 3:6] = _EYE3
    # rotation rows
    F[:, 6:9, 6:9] = -Dpsi @ np.swapaxes(Gmat, -1, -2)
    F[:, 6:9, 9:12] = -Dpsi @ MT_Dnu @ Komega
    G[:, 6:9, 1:4] = -(0.5 * dt**2) * (Dpsi @ MT_Dnu) @ Jinv
    E[:, 6:9, 6:9] = Dpsi
    # angular velocity rows
    F[:, 9:12, 9:12] = -(_EYE3 + dt * np.einsum("ab,nbc->nac", Jinv, dalpha))
    G[:, 9:12, 1:4] = -dt * Jinv
    E[:, 9:12, 9:12] = _EYE3
    return F, G, E


def cost_gradient(prob: ShootingProblem):
    """Analytic gradient of the objective in local coordinates.

    Returns (gx, gu): gx (N, 12) for nodes 1..N, gu (N, 4) for controls
    0..N-1 (node 0 is pinned, so its state gradient is irrelevant).
    """
    gx, gu, _, _ = _cost_model(prob)
    return gx, gu


def _cost_model(prob: ShootingProblem):
    """Gradient and Gauss-Newton Hessian blocks of the objective."""
    spec, w = prob.spec, prob.spec.weights
    att = w.attitude
    eq = spec.equilibrium
    p = prob.quad.body
    N = spec.horizon
    zj = spec.zeta ** np.arange(N + 1)

    R = prob.R
    e1d, e2d = eq.R_d @ att.e1, eq.R_d @ att.e2
    psi_all = att.k1 * (1.0 - (R @ att.e1) @ e1d) + att.k2 * (1.0 - (R @ att.e2) @ e2d)
    # d psi / d delta (body tangent): -sum_i k_i e_i x (R^T Rd e_i)
    gpsi_all = -(att.k1 * np.cross(att.e1, np.einsum("nba,b->na", R, e1d))
                 + att.k2 * np.cross(att.e2, np.einsum("nba,b->na", R, e2d)))

    f = (R[:-1] @ p.thrust_axis) * prob.u[:, 0:1] \
        - p.mass * p.gravity * np.array([0.0, 0.0, 1.0])
    thrust_dir = R[:-1] @ p.thrust_axis

    gx = np.zeros((N, 12))
    gu = np.zeros((N, 4))
    Hxx = np.zeros((N, 12, 12))
    Huu = np.zeros((N, 4, 4))

    zs = zj[1:, None]
    gx[:, 0:3] = 2.0 * w.kp * zs * (prob.xi[1:] - eq.xi_e)
    gx[:, 3:6] = 2.0 * w.kv * zs * (prob.v[1:] - eq.v_e)
    gx[:, 6:9] = 2.0 * w.kR * zs * psi_all[1:, None] * gpsi_all[1:]
    gx[:, 9:12] = 2.0 * w.komega * zs * (prob.om[1:] - eq.omega_e)

    idx = np.arange(3)
    Hxx[:, idx, idx] = 2.0 * w.kp * zs
    Hxx[:, idx + 3, idx + 3] = 2.0 * w.kv * zs
    Hxx[:, idx + 9, idx + 9] = 2.0 * w.komega * zs
    Hxx[:, 6:9, 6:9] = (2.0 * w.kR * zs[:, :, None]) * (
        gpsi_all[1:, :, None] * gpsi_all[1:, None, :])

    # input-side terms; the force residual at node j>=1 also loads the node's
    # rotation tangent (its coupling to thrust vanishes because S(e) e = 0)
    Se = skew(p.thrust_axis)
    SeTSe = Se.T @ Se
    T = prob.u[:, 0]
    gu[:, 0] = 2.0 * w.kf * np.sum(thrust_dir * f, axis=1)
    gu[:, 1:] = 2.0 * w.ktau * prob.u[:, 1:]
    Huu[:, 0, 0] = 2.0 * w.kf
    Huu[:, idx[:, None] + 1, idx[None, :] + 1] = 2.0 * w.ktau * _EYE3

    # force residual state parts for nodes 1..N-1 (node 0 fixed, node N has none)
    if N > 1:
        Rf = np.einsum("nba,nb->na", R[1:N], f[1:])  # R^T f
        gx[: N - 1, 6:9] += 2.0 * w.kf * T[1:, None] * np.cross(
            np.broadcast_to(p.thrust_axis, (N - 1, 3)), Rf)
        Hxx[: N - 1, 6:9, 6:9] += (2.0 * w.kf) * (T[1:, None, None] ** 2) * SeTSe
    return gx, gu, Hxx, Huu


# ---------------------------------------------------------------------------
# condensing and the control-space QP
# ---------------------------------------------------------------------------

@njit(cache=True)
def _condense_kernel(A, B, b, Hxx, Huu, gx, gu):
    N = A.shape[0]
    nu = 4 * N
    S = np.zeros((N, 12, nu))
    s = np.zeros((N, 12))
    S[0, :, 0:4] = B[0]
    s[0] = b[0]
    for j in range(1, N):
        # S is block lower-triangular: only the first 4*(j+1) columns live
        S[j, :, : 4 * j] = A[j] @ S[j - 1, :, : 4 * j]
        S[j, :, 4 * j: 4 * j + 4] += B[j]
        s[j] = A[j] @ s[j - 1] + b[j]

    W = np.zeros((N, 12, nu))
    q = np.empty((N, 12))
    for j in range(N):
        W[j, :, : 4 * (j + 1)] = Hxx[j] @ S[j, :, : 4 * (j + 1)]
        q[j] = Hxx[j] @ s[j] + gx[j]
    Sflat = S.reshape(12 * N, nu)
    Hc = Sflat.T @ W.reshape(12 * N, nu)
    for j in range(N):
        Hc[4 * j: 4 * j + 4, 4 * j: 4 * j + 4] += Huu[j]
    gc = Sflat.T @ q.reshape(12 * N) + gu.reshape(nu)
    return Hc, gc, S, s


def _condense(F, G, E, c, Hxx, Huu, gx, gu):
    """Eliminate state increments: X = S U + s with X stacked dx_1..dx_N.

    Returns the undamped condensed Hessian (the solver adds its current
    Levenberg shift) plus (A, Einv) so a feasibility correction for fresh
    defect values can be rebuilt without re-linearizing.
    """
    # dx_{j+1} = A_j dx_j + B_j du_j + b_j; only E's rotation block differs from I
    Einv = E.copy()
    Einv[:, 6:9, 6:9] = np.linalg.inv(E[:, 6:9, 6:9])
    A = -(Einv @ F)
    B = -(Einv @ G)
    b = -np.einsum("nij,nj->ni", Einv, c)
    Hc, gc, S, s = _condense_kernel(A, B, b, Hxx, Huu, gx, gu)
    return Hc, gc, S, s, A, Einv


def _defect_correction(A, Einv, c_new):
    """State-only correction annihilating the linearized defects c_new under
    the existing linearization (second-order correction for the line search)."""
    N = A.shape[0]
    b = -np.einsum("nij,nj->ni", Einv, c_new)
    s = np.zeros((N, 12))
    s[0] = b[0]
    for j in range(1, N):
        s[j] = A[j] @ s[j - 1] + b[j]
    return s


def _defect_multipliers(A, Hxx, gx, X):
    """Costates of the linearized problem at the QP solution, via the adjoint
    recursion. Their magnitude sizes the l1 merit penalty: the penalty must
    dominate the multipliers for the exact-penalty line search to accept
    feasibility-restoring full steps."""
    N = A.shape[0]
    grad = np.einsum("nij,nj->ni", Hxx, X) + gx
    pi = np.empty((N, 12))
    pi[N - 1] = -grad[N - 1]
    for j in range(N - 2, -1, -1):
        pi[j] = A[j + 1].T @ pi[j + 1] - grad[j]
    return pi


def _rotor_constraint_matrix(N, quad: QuadrotorParams):
    """Constant matrix C of the rotor-box rows C @ dU <= d (8 per interval:
    four upper bounds then four lower bounds)."""
    Winv = quad.mixing_inverse
    C = np.zeros((8 * N, 4 * N))
    for j in range(N):
        C[8 * j: 8 * j + 4, 4 * j: 4 * j + 4] = Winv
        C[8 * j + 4: 8 * j + 8, 4 * j: 4 * j + 4] = -Winv
    return C


def _rotor_constraint_rhs(u, spec: OcpSpec, quad: QuadrotorParams):
    lo, hi = spec.rotor_bounds
    f = u @ quad.mixing_inverse.T
    d = np.empty((u.shape[0], 8))
    d[:, 0:4] = hi - f
    d[:, 4:8] = f - lo
    return d.reshape(-1)


def _state_box_constraints(S, s, prob: ShootingProblem):
    """Optional per-component boxes on xi, v, omega for nodes 1..N."""
    sb = prob.spec.state_bounds
    if sb is None or not sb.any_active():
        return None, None
    N = prob.horizon
    rows, rhs = [], []
    vals = {"xi": prob.xi[1:], "v": prob.v[1:], "omega": prob.om[1:]}
    offs = {"xi": 0, "v": 3, "omega": 9}
    for name in ("xi", "v", "omega"):
        lo = getattr(sb, f"{name}_lo")
        hi = getattr(sb, f"{name}_hi")
        for j in range(N):
            for k in range(3):
                row = S[j, offs[name] + k]
                base = vals[name][j, k] + s[j, offs[name] + k]
                if hi is not None and np.isfinite(hi[k]):
                    rows.append(row)
                    rhs.append(hi[k] - base)
                if lo is not None and np.isfinite(lo[k]):
                    rows.append(-row)
                    rhs.append(base - lo[k])
    if not rows:
        return None, None
    return np.array(rows), np.array(rhs)


def _active_set_qp(H, g, C, d, cfg: SolverConfig, warm_set=()):
    """min 1/2 u^T H u + g^T u  s.t.  C u <= d, feasible start u = 0.

    Primal active-set with lowest-index tie-breaking; returns the minimizer,
    the multipliers of the final working set, and the working-set row indices.
    The warm-start working set may contain rows that are not tight at u = 0;
    the equality step lands on those faces and negative multipliers shed them.

    H is factored once (Cholesky); each working set is handled through the
    Schur complement on lazily back-solved constraint rows, so adding or
    dropping a row costs one triangular solve instead of a fresh KKT solve.
    """
    n = H.shape[0]
    m = d.shape[0]
    u = np.zeros(n)
    d = np.maximum(d, 0.0)  # u = 0 must be feasible; clip round-off
    in_work = d <= cfg.qp_tol
    for i in warm_set:
        if 0 <= i < m:
            in_work[i] = True
    work = [int(i) for i in np.nonzero(in_work)[0]]
    lam = np.zeros(0)

    try:
        chol = cho_factor(H, lower=True)
        Hg = cho_solve(chol, g)
    except np.linalg.LinAlgError:  # pragma: no cover - H is PD by construction
        chol = None
        Hg = np.linalg.lstsq(H, g, rcond=None)[0]

    def back_solve(rhs):
        if chol is None:
            return np.linalg.lstsq(H, rhs, rcond=None)[0]
        return cho_solve(chol, rhs)

    cHg = C @ Hg
    # incrementally maintained working-set buffers: rows of Cw, columns of
    # Z = H^-1 Cw^T, and the Schur complement Sw = Cw Z
    cap = max(16, 2 * len(work) + 8)
    Cw = np.empty((cap, n))
    Zw = np.empty((n, cap))
    Sw = np.empty((cap, cap))
    nw = 0

    def grow():
        nonlocal cap, Cw, Zw, Sw
        cap *= 2
        Cw = np.resize(Cw, (cap, n))
        Zw_new = np.empty((n, cap))
        Zw_new[:, :nw] = Zw[:, :nw]
        Sw_new = np.empty((cap, cap))
        Sw_new[:nw, :nw] = Sw[:nw, :nw]
        Zw, Sw = Zw_new, Sw_new

    def add_row(i):
        nonlocal nw
        if nw == cap:
            grow()
        z = back_solve(C[i])
        Cw[nw] = C[i]
        Zw[:, nw] = z
        col = Cw[:nw] @ z
        Sw[:nw, nw] = col
        Sw[nw, :nw] = col
        Sw[nw, nw] = C[i] @ z
        nw += 1

    def drop_row(j):
        nonlocal nw
        keep = list(range(j)) + list(range(j + 1, nw))
        Cw[: nw - 1] = Cw[keep]
        Zw[:, : nw - 1] = Zw[:, keep]
        Sw[: nw - 1, : nw - 1] = Sw[np.ix_(keep, keep)]
        nw -= 1

    initial = work
    work = []
    for i in initial:
        add_row(i)
        work.append(i)

    for _ in range(cfg.max_qp_iterations):
        k = nw
        if k == 0:
            u_star = -Hg
            lam = np.zeros(0)
        else:
            widx = np.asarray(work)
            rhs = -(cHg[widx] + d[widx])
            try:
                lam = np.linalg.solve(Sw[:k, :k], rhs)
            except np.linalg.LinAlgError:
                lam = np.linalg.lstsq(Sw[:k, :k], rhs, rcond=None)[0]
            u_star = -Hg - Zw[:, :k] @ lam

        p = u_star - u
        if np.max(np.abs(p), initial=0.0) <= cfg.qp_tol:
            u = u_star
            if lam.size == 0 or np.min(lam) >= -1e-9:
                return u, lam, work
            # drop the most negative multiplier; lowest constraint index on ties
            mn = np.min(lam)
            drop = min((pos for pos in range(k) if lam[pos] == mn),
                       key=lambda pos: work[pos])
            in_work[work[drop]] = False
            work.pop(drop)
            drop_row(drop)
            continue

        # step toward u_star, watching inactive constraints (vectorized;
        # argmin keeps the lowest blocking index on exact ties)
        cp = C @ p
        candidates = (~in_work) & (cp > cfg.qp_tol)
        if np.any(candidates):
            ratios = np.full(m, np.inf)
            cu = C @ u
            ratios[candidates] = (d[candidates] - cu[candidates]) / cp[candidates]
            blocking = int(np.argmin(ratios))
            alpha = ratios[blocking]
            if alpha < 1.0 - 1e-15:
                u = u + max(alpha, 0.0) * p
                in_work[blocking] = True
                work.append(blocking)
                add_row(blocking)
                continue
        u = u_star
    return u, lam, work


# ---------------------------------------------------------------------------
# the SQP driver
# ---------------------------------------------------------------------------

def _apply_step(R, xi, v, om, u, X, U, alpha, N):
    dX = alpha * X
    Rn = R.copy()
    Rn[1:] = R[1:] @ _bcay(dX[:, 6:9])
    xin = xi.copy()
    vn = v.copy()
    omn = om.copy()
    xin[1:] += dX[:, 0:3]
    vn[1:] += dX[:, 3:6]
    omn[1:] += dX[:, 9:12]
    un = u + alpha * U.reshape(N, 4)
    return Rn, xin, vn, omn, un


def solve(prob: ShootingProblem, cfg: SolverConfig = SolverConfig(),
          warm: InitialGuess | None = None, observer=None) -> SolveResult:
    """Solve the transcribed OCP; deterministic for identical inputs.

    `observer`, when given, is called after every accepted step with a dict
    carrying iteration, alpha, merit before/after, cost, and feasibility.
    """
    t_start = time.perf_counter()
    spec, quad = prob.spec, prob.quad
    N = spec.horizon
    warm_set = ()
    if warm is not None:
        prob.set_guess(warm.R, warm.xi, warm.v, warm.om, warm.u)
        prob.u = _clip_controls(prob.u, spec, quad)
        warm_set = warm.active_set
        max_iter = cfg.max_iterations_warm
    else:
        if prob.R is None:
            cold = transcribe(prob.x0, spec, quad)
            prob.set_guess(cold.R, cold.xi, cold.v, cold.om, cold.u)
        max_iter = cfg.max_iterations

    mu = 10.0
    lm = cfg.levenberg
    status = SolveStatus.MAX_ITER
    iterations = 0
    kkt_res = np.inf
    Crot = _rotor_constraint_matrix(N, quad)
    n_rotor_rows = Crot.shape[0]
    diag = np.arange(4 * N)
    work = list(warm_set)

    c = eval_defects(prob)
    cost = eval_objective(prob)

    for it in range(max_iter):
        iterations = it + 1
        feas = float(np.max(np.abs(c)))

        F, G, E = defect_jacobians(prob)
        gx, gu, Hxx, Huu = _cost_model(prob)
        Hc0, gc, S, s, A, Einv = _condense(F, G, E, c, Hxx, Huu, gx, gu)
        C, d = Crot, _rotor_constraint_rhs(prob.u, spec, quad)
        Cs, ds = _state_box_constraints(S, s, prob)
        if Cs is not None:
            C = np.vstack([C, Cs])
            d = np.concatenate([d, ds])
        c_l1 = float(np.sum(np.abs(c)))
        accepted = False
        converged = False

        # inner damping loop: a rejected step retries the same linearization
        # with a stronger Levenberg shift (shorter, better-conditioned step)
        for _ in range(8):
            Hc = Hc0.copy()
            Hc[diag, diag] += lm
            U, lam, work = _active_set_qp(Hc, gc, C, d, cfg,
                                          warm_set=[w for w in work if w < n_rotor_rows])
            X = (S @ U) + s
            pi = _defect_multipliers(A, Hxx, gx, X)
            # stationarity scaled by multiplier magnitude (s_max = 100), so
            # the threshold stays meaningful across cost scales
            s_d = max(1.0, (float(np.sum(np.abs(pi))) + float(np.sum(np.abs(lam))))
                      / (pi.size + max(lam.size, 1)) / 100.0)
            kkt_res = float(np.max(np.abs(Hc @ U), initial=0.0)) / s_d
            if feas <= cfg.feas_tol and kkt_res <= cfg.opt_tol:
                converged = True
                break

            df_lin = float(np.sum(gx * X) + gu.reshape(-1) @ U)
            if c_l1 > 0.0:
                # penalty sized to the current multipliers (fresh each
                # iteration: a stale large mu from the transient would make
                # later line searches reject cost-restoring steps)
                mu = max(10.0, 1.1 * float(np.max(np.abs(pi))) + 1.0,
                         2.0 * max(0.0, df_lin) / c_l1 + 1.0)
            D = df_lin - mu * c_l1
            if D > -1e-16 and feas <= cfg.feas_tol:
                converged = True  # no descent at a feasible point
                break
            merit0 = cost + mu * c_l1

            alpha = 1.0
            for _ in range(cfg.max_backtracks):
                trial = _apply_step(prob.R, prob.xi, prob.v, prob.om, prob.u, X, U, alpha, N)
                trial_prob = ShootingProblem(x0=prob.x0, spec=spec, quad=quad,
                                             R=trial[0], xi=trial[1], v=trial[2],
                                             om=trial[3], u=trial[4])
                try:
                    c_t = eval_defects(trial_prob)
                    cost_t = eval_objective(trial_prob)
                except _RotationDefectTooLarge:
                    alpha *= cfg.backtrack
                    continue
                merit_t = cost_t + mu * float(np.sum(np.abs(c_t)))
                if merit_t <= merit0 + cfg.armijo * alpha * D:
                    prob.R, prob.xi, prob.v, prob.om, prob.u = trial
                    c, cost = c_t, cost_t
                    accepted = True
                    accepted_merit = merit_t
                    break
                # second-order correction: cancel the defects the step
                # regenerated (Maratos guard) before shortening it further
                X_soc = _defect_correction(A, Einv, c_t)
                soc = _apply_step(trial[0], trial[1], trial[2], trial[3], trial[4],
                                  X_soc, np.zeros_like(U), 1.0, N)
                soc_prob = ShootingProblem(x0=prob.x0, spec=spec, quad=quad,
                                           R=soc[0], xi=soc[1], v=soc[2],
                                           om=soc[3], u=soc[4])
                try:
                    c_s = eval_defects(soc_prob)
                    cost_s = eval_objective(soc_prob)
                except _RotationDefectTooLarge:
                    alpha *= cfg.backtrack
                    continue
                merit_s = cost_s + mu * float(np.sum(np.abs(c_s)))
                if merit_s <= merit0 + cfg.armijo * alpha * D:
                    prob.R, prob.xi, prob.v, prob.om, prob.u = soc
                    c, cost = c_s, cost_s
                    accepted = True
                    accepted_merit = merit_s
                    break
                alpha *= cfg.backtrack
                if alpha < 2.0 ** -6:
                    break  # hand control back to the damping loop instead

            if accepted:
                if observer is not None:
                    observer({"iteration": iterations, "alpha": alpha,
                              "merit_before": merit0, "merit_after": accepted_merit,
                              "cost": cost, "feasibility": float(np.max(np.abs(c)))})
                if alpha >= 1.0:
                    lm = max(cfg.levenberg, lm / 3.0)
                elif alpha <= 0.125:
                    lm = min(lm * 5.0, 1e8)
                break
            lm = min(max(lm * 10.0, 1e-4), 1e8)
            if lm >= 1e8:
                break

        if converged:
            status = SolveStatus.CONVERGED
            break
        if not accepted:
            status = SolveStatus.INFEASIBLE if feas > cfg.feas_tol else SolveStatus.MAX_ITER
            break

    final_feas = float(np.max(np.abs(c)))
    if status is SolveStatus.MAX_ITER and final_feas > 10.0:
        status = SolveStatus.INFEASIBLE
    return SolveResult(
        us=prob.u.copy(),
        R=prob.R.copy(), xi=prob.xi.copy(), v=prob.v.copy(), om=prob.om.copy(),
        objective=cost,
        iterations=iterations,
        status=status,
        max_defect=final_feas,
        kkt_residual=kkt_res,
        solve_time=time.perf_counter() - t_start,
        active_set=tuple(int(w) for w in work if w < n_rotor_rows),
    )
