"""Stage costs and receding-horizon problem data for both control schemes.

The stage cost at horizon index j is

    zeta^j * (kp|xi - xi_e|^2 + kv|v - v_e|^2 + kw|w - w_e|^2 + kR*Psi^2)
           + kf|f|^2 + kt|tau|^2

with Psi the attitude error and f the inertial resultant force (thrust plus
gravity, so the hover equilibrium has exactly zero cost). zeta = 1 recovers
the plain regulating scheme; zeta > 1 is the fast-motion (economic) variant.
The horizon sum runs j = 0..N with the input term absent at j = N (there are
only N controls).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import ControlInput, RigidBodyParams, RigidState, total_force
from .integrator import step_predictor
from .so3 import AttitudeErrorWeights, attitude_error


class LengthMismatch(ValueError):
    """Trajectory lengths inconsistent with the horizon."""


@dataclass(frozen=True)
class CostWeights:
    """Positive stage-cost gains. kv*kf and komega*ktau >= 0.25 are the gain
    conditions the dissipativity certificate checks (not enforced here)."""

    kp: float = 150.0
    kv: float = 30.0
    kR: float = 10.0
    komega: float = 0.85
    kf: float = 5e-2
    ktau: float = 0.3
    attitude: AttitudeErrorWeights = field(default_factory=AttitudeErrorWeights)

    def __post_init__(self):
        for name in ("kp", "kv", "kR", "komega", "kf", "ktau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def gain_products(self):
        return self.kv * self.kf, self.komega * self.ktau


@dataclass(frozen=True)
class Equilibrium:
    """Set-point (R_d, xi_e, v_e, omega_e) with its steady input u_e."""

    R_d: np.ndarray
    xi_e: np.ndarray
    v_e: np.ndarray
    omega_e: np.ndarray
    u_e: ControlInput

    def state(self) -> RigidState:
        return RigidState(R=self.R_d, xi=self.xi_e, omega=self.omega_e, v=self.v_e)


def hover_equilibrium(p: RigidBodyParams, xi=(0.0, 0.0, 4.0)) -> Equilibrium:
    """Hover set-point at position xi with identity attitude."""
    return Equilibrium(
        R_d=np.eye(3),
        xi_e=np.asarray(xi, dtype=float),
        v_e=np.zeros(3),
        omega_e=np.zeros(3),
        u_e=ControlInput(thrust=p.hover_thrust, torque=np.zeros(3)),
    )


def validate_equilibrium(eq: Equilibrium, p: RigidBodyParams, dt: float, tol=1e-10):
    """Check the fixed-point property of the prediction model at (x_e, u_e)."""
    x = eq.state()
    xn = step_predictor(x, eq.u_e, p, dt)
    err = max(
        np.linalg.norm(xn.xi - x.xi),
        np.linalg.norm(xn.v - x.v),
        np.linalg.norm(xn.omega - x.omega),
        np.linalg.norm(xn.R - x.R, ord="fro"),
    )
    if err > tol:
        raise ValueError(f"equilibrium is not a fixed point of the predictor (residual {err:.2e})")
    return err


@dataclass(frozen=True)
class StateBounds:
    """Optional per-component boxes on xi, v, omega (None = unbounded)."""

    xi_lo: np.ndarray | None = None
    xi_hi: np.ndarray | None = None
    v_lo: np.ndarray | None = None
    v_hi: np.ndarray | None = None
    omega_lo: np.ndarray | None = None
    omega_hi: np.ndarray | None = None

    def any_active(self):
        return any(
            getattr(self, f) is not None
            for f in ("xi_lo", "xi_hi", "v_lo", "v_hi", "omega_lo", "omega_hi")
        )


@dataclass(frozen=True)
class OcpSpec:
    """Everything that configures one optimal control problem."""

    horizon: int = 40
    dt: float = 0.01
    weights: CostWeights = field(default_factory=CostWeights)
    zeta: float = 1.0
    equilibrium: Equilibrium = None
    rotor_bounds: tuple = (0.0, 12.3)
    state_bounds: StateBounds | None = None

    def __post_init__(self):
        if self.horizon < 4:
            raise ValueError("horizon must be at least 4")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.zeta >= 1.0:
            raise ValueError("zeta must be >= 1 (1 recovers the regulating scheme)")
        if self.equilibrium is None:
            raise ValueError("an equilibrium set-point is required")
        lo, hi = self.rotor_bounds
        if not lo < hi:
            raise ValueError("rotor_bounds must satisfy lo < hi")

    def with_zeta(self, zeta: float) -> "OcpSpec":
        return replace(self, zeta=float(zeta))


@dataclass(frozen=True)
class ErrorVector:
    """The 10-dimensional error (xi_err, v_err, psi, omega_err)."""

    xi_err: np.ndarray
    v_err: np.ndarray
    psi: float
    omega_err: np.ndarray


def error_vector(x: RigidState, spec: OcpSpec) -> ErrorVector:
    eq = spec.equilibrium
    return ErrorVector(
        xi_err=x.xi - eq.xi_e,
        v_err=x.v - eq.v_e,
        psi=attitude_error(x.R, eq.R_d, spec.weights.attitude),
        omega_err=x.omega - eq.omega_e,
    )


def state_error_cost(x: RigidState, spec: OcpSpec) -> float:
    """|x_err|^2 in the weighted norm (no zeta factor, no input term)."""
    w = spec.weights
    e = error_vector(x, spec)
    return (
        w.kp * e.xi_err @ e.xi_err
        + w.kv * e.v_err @ e.v_err
        + w.komega * e.omega_err @ e.omega_err
        + w.kR * e.psi**2
    )


def input_cost(x: RigidState, u: ControlInput, spec: OcpSpec, p: RigidBodyParams) -> float:
    """kf|f|^2 + kt|tau|^2 with f the state-dependent resultant force."""
    w = spec.weights
    f = total_force(x, u, p)
    return w.kf * f @ f + w.ktau * u.torque @ u.torque


def stage_cost(x: RigidState, u: ControlInput, j: int, spec: OcpSpec, p: RigidBodyParams) -> float:
    """zeta^j weighted state term plus the (unweighted) input term."""
    if not 0 <= j <= spec.horizon:
        raise ValueError("stage index outside [0, horizon]")
    return spec.zeta**j * state_error_cost(x, spec) + input_cost(x, u, spec, p)


def horizon_cost(xs, us, spec: OcpSpec, p: RigidBodyParams) -> float:
    """Objective over j = 0..N: N full stages plus the state-only terminal term."""
    N = spec.horizon
    if len(xs) != N + 1:
        raise LengthMismatch(f"expected {N + 1} states, got {len(xs)}")
    if len(us) < N:
        raise LengthMismatch(f"expected at least {N} controls, got {len(us)}")
    total = 0.0
    for j in range(N):
        total += stage_cost(xs[j], us[j], j, spec, p)
    total += spec.zeta**N * state_error_cost(xs[N], spec)
    return total
