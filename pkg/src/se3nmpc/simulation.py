"""Closed-loop execution, logging, metrics, and scheme comparison.

Each controller tick measures the plant state, solves the receding-horizon
problem (warm-started from the shifted previous solution after tick 0),
saturates the first control through the rotor-force box, applies it to the
plant for one sampling period, and logs everything. The plant is propagated
with the RK4 truth model, so prediction/plant mismatch is always present.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import (ControlInput, QuadrotorParams, RigidBodyParams,
                       RigidState, saturate_rotor_forces)
from .integrator import step_plant
from .ocp import OcpSpec, error_vector, input_cost, state_error_cost
from .so3 import rotation_defect
from .solver import (ShootingProblem, SolveResult, SolveStatus,
                     SolverConfig, shift_warm_start, solve, transcribe)

CSV_SCHEMA_VERSION = "se3nmpc-log-v1"
CSV_COLUMNS = (
    "t,xi_x,xi_y,xi_z,v_x,v_y,v_z,wx,wy,wz,"
    "R11,R12,R13,R21,R22,R23,R31,R32,R33,"
    "T,tau_x,tau_y,tau_z,f1,f2,f3,f4,"
    "psi,stage_cost,pos_err,solve_ms,iters,status"
)


class NotSettled(RuntimeError):
    """The position error never entered (and stayed in) the settling band."""


@dataclass(frozen=True)
class Scenario:
    """One closed-loop experiment: initial state, OCP spec, scheme, duration.

    The plant mass/inertia scale factors perturb the truth model only (the
    controller keeps the nominal parameters), for mismatch studies beyond the
    built-in integrator discrepancy; 1.0 disables them.
    """

    name: str
    x0: RigidState
    spec: OcpSpec
    scheme: str = "nmpc"          # "nmpc" (zeta forced to 1) or "fmnmpc"
    duration: float = 20.0
    plant_substeps: int = 10
    plant_mass_scale: float = 1.0
    plant_inertia_scale: float = 1.0

    def __post_init__(self):
        if self.scheme not in ("nmpc", "fmnmpc"):
            raise ValueError("scheme must be 'nmpc' or 'fmnmpc'")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.plant_mass_scale <= 0 or self.plant_inertia_scale <= 0:
            raise ValueError("plant parameter scales must be positive")

    @property
    def effective_spec(self) -> OcpSpec:
        """The spec actually solved: zeta = 1 under the regulating scheme."""
        return self.spec.with_zeta(1.0) if self.scheme == "nmpc" else self.spec

    def plant_params(self, nominal) -> RigidBodyParams:
        if self.plant_mass_scale == 1.0 and self.plant_inertia_scale == 1.0:
            return nominal
        return RigidBodyParams(
            mass=self.plant_mass_scale * nominal.mass,
            inertia=self.plant_inertia_scale * nominal.inertia,
            thrust_axis=nominal.thrust_axis,
            gravity=nominal.gravity,
        )


@dataclass
class ClosedLoopLog:
    """Tick-indexed closed-loop record on a uniform time grid."""

    scenario: str
    scheme: str
    t: np.ndarray
    xi: np.ndarray            # (n, 3)
    v: np.ndarray
    omega: np.ndarray
    R: np.ndarray             # (n, 3, 3)
    thrust: np.ndarray        # applied (saturated) wrench
    torque: np.ndarray
    rotor_forces: np.ndarray  # (n, 4)
    psi: np.ndarray
    stage_cost: np.ndarray    # state-error index |x_err|^2_Q (no input term)
    pos_err: np.ndarray
    solve_ms: np.ndarray
    iters: np.ndarray
    status: list

    def __len__(self):
        return self.t.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {CSV_SCHEMA_VERSION}\n")
        buf.write(CSV_COLUMNS + "\n")
        for k in range(len(self)):
            row = [
                self.t[k], *self.xi[k], *self.v[k], *self.omega[k],
                *self.R[k].reshape(9), self.thrust[k], *self.torque[k],
                *self.rotor_forces[k], self.psi[k], self.stage_cost[k],
                self.pos_err[k], self.solve_ms[k],
            ]
            buf.write(",".join(f"{x:.12g}" for x in row))
            buf.write(f",{int(self.iters[k])},{self.status[k]}\n")
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())


@dataclass(frozen=True)
class Metrics:
    """Summary numbers for one closed-loop run."""

    scenario: str
    scheme: str
    settling_time: float | None
    steady_state_pos_err: float
    final_pos_err: float
    final_psi: float
    max_rotor_force: float
    min_rotor_force: float
    bound_violations: int
    total_cost: float         # sum over ticks of full stage cost (state + input)
    mean_solve_ms: float
    max_solve_ms: float
    max_iterations: int
    infeasible_ticks: int
    max_rotation_defect: float

    def as_dict(self):
        d = dict(self.__dict__)
        return d


def run_closed_loop(sc: Scenario, quad: QuadrotorParams,
                    solver_config: SolverConfig | None = None) -> ClosedLoopLog:
    """Execute the measure/solve/apply loop for the whole scenario duration.

    The log has duration/dt + 1 rows; the final row holds the terminal state
    together with the control the solver would apply there.
    """
    cfg = solver_config or SolverConfig()
    spec = sc.effective_spec
    p = sc.plant_params(quad.body)
    dt = spec.dt
    n_ticks = int(round(sc.duration / dt)) + 1

    t = np.arange(n_ticks) * dt
    xi = np.empty((n_ticks, 3))
    v = np.empty((n_ticks, 3))
    omega = np.empty((n_ticks, 3))
    R = np.empty((n_ticks, 3, 3))
    thrust = np.empty(n_ticks)
    torque = np.empty((n_ticks, 3))
    rotor = np.empty((n_ticks, 4))
    psi = np.empty(n_ticks)
    stage = np.empty(n_ticks)
    pos_err = np.empty(n_ticks)
    solve_ms = np.empty(n_ticks)
    iters = np.empty(n_ticks, dtype=int)
    status = []

    state = sc.x0
    prev: SolveResult | None = None
    for k in range(n_ticks):
        if prev is None:
            prob = transcribe(state, spec, quad)
            result = solve(prob, cfg)
        else:
            guess = shift_warm_start(prev, spec, quad)
            prob = ShootingProblem(x0=state, spec=spec, quad=quad)
            result = solve(prob, cfg, warm=guess)
        prev = result

        u_sat, forces, _ = saturate_rotor_forces(result.first_control, quad)

        xi[k], v[k], omega[k], R[k] = state.xi, state.v, state.omega, state.R
        err = error_vector(state, spec)
        psi[k] = err.psi
        stage[k] = state_error_cost(state, spec)
        pos_err[k] = np.linalg.norm(err.xi_err)
        thrust[k] = u_sat.thrust
        torque[k] = u_sat.torque
        rotor[k] = forces.f
        solve_ms[k] = result.solve_time * 1e3
        iters[k] = result.iterations
        status.append(result.status.value)

        if k < n_ticks - 1:
            state = step_plant(state, u_sat, p, dt, substeps=sc.plant_substeps)

    return ClosedLoopLog(
        scenario=sc.name, scheme=sc.scheme, t=t, xi=xi, v=v, omega=omega, R=R,
        thrust=thrust, torque=torque, rotor_forces=rotor, psi=psi,
        stage_cost=stage, pos_err=pos_err, solve_ms=solve_ms, iters=iters,
        status=status,
    )


def settling_time(log: ClosedLoopLog, band: float = 0.02) -> float:
    """First time after which the position error stays within band * initial
    error permanently. Zero when the log starts (and stays) inside the band."""
    if len(log) == 0:
        raise NotSettled("empty log")
    threshold = band * log.pos_err[0]
    inside = log.pos_err <= threshold
    if not inside[-1]:
        raise NotSettled("position error ends outside the settling band")
    outside = np.nonzero(~inside)[0]
    if outside.size == 0:
        return 0.0
    return float(log.t[outside[-1] + 1])


def compute_metrics(log: ClosedLoopLog, sc: Scenario, quad: QuadrotorParams,
                    band: float = 0.02) -> Metrics:
    spec = sc.effective_spec
    try:
        ts = settling_time(log, band)
    except NotSettled:
        ts = None
    lo, hi = spec.rotor_bounds
    tol = 1e-9
    violations = int(np.sum((log.rotor_forces < lo - tol) | (log.rotor_forces > hi + tol)))
    tail = max(1, len(log) // 10)
    total = 0.0
    for k in range(len(log)):
        x = RigidState(R=log.R[k], xi=log.xi[k], omega=log.omega[k], v=log.v[k])
        u = ControlInput(thrust=log.thrust[k], torque=log.torque[k])
        total += log.stage_cost[k] + input_cost(x, u, spec, quad.body)
    max_defect = max(rotation_defect(log.R[k]) for k in range(len(log)))
    return Metrics(
        scenario=sc.name,
        scheme=sc.scheme,
        settling_time=ts,
        steady_state_pos_err=float(np.mean(log.pos_err[-tail:])),
        final_pos_err=float(log.pos_err[-1]),
        final_psi=float(log.psi[-1]),
        max_rotor_force=float(np.max(log.rotor_forces)),
        min_rotor_force=float(np.min(log.rotor_forces)),
        bound_violations=violations,
        total_cost=float(total),
        mean_solve_ms=float(np.mean(log.solve_ms)),
        max_solve_ms=float(np.max(log.solve_ms)),
        max_iterations=int(np.max(log.iters)),
        infeasible_ticks=sum(1 for s in log.status if s == SolveStatus.INFEASIBLE.value),
        max_rotation_defect=float(max_defect),
    )


@dataclass(frozen=True)
class SchemeComparison:
    """Paired regulating vs fast-motion results over a scenario suite."""

    scenarios: list
    settling_nmpc: list
    settling_fmnmpc: list
    reductions: list            # per-scenario relative settling-time reduction
    mean_reduction: float
    pointwise_cost_leq: list    # per-scenario: fast-motion curve <= regulating curve
    metrics_nmpc: list
    metrics_fmnmpc: list

    def as_dict(self):
        return {
            "scenarios": self.scenarios,
            "settling_nmpc": self.settling_nmpc,
            "settling_fmnmpc": self.settling_fmnmpc,
            "reductions": self.reductions,
            "mean_reduction": self.mean_reduction,
            "pointwise_cost_leq": self.pointwise_cost_leq,
            "metrics_nmpc": [m.as_dict() for m in self.metrics_nmpc],
            "metrics_fmnmpc": [m.as_dict() for m in self.metrics_fmnmpc],
        }


def compare_schemes(scenarios, quad: QuadrotorParams,
                    solver_config: SolverConfig | None = None,
                    band: float = 0.02, transient: float = 2.0,
                    cost_slack: float = 1e-9):
    """Run every scenario under both schemes (identical apart from zeta) and
    aggregate settling times, relative reductions, and the pointwise
    state-cost comparison for t >= transient.

    Returns (comparison, logs) with logs keyed by (scenario, scheme).
    """
    logs = {}
    names, s_n, s_f, reds, leq, mn, mf = [], [], [], [], [], [], []
    for sc in scenarios:
        pair = {}
        for scheme in ("nmpc", "fmnmpc"):
            variant = replace(sc, scheme=scheme)
            log = run_closed_loop(variant, quad, solver_config)
            logs[(sc.name, scheme)] = log
            pair[scheme] = (variant, log)
        (v_n, log_n), (v_f, log_f) = pair["nmpc"], pair["fmnmpc"]
        m_n = compute_metrics(log_n, v_n, quad, band)
        m_f = compute_metrics(log_f, v_f, quad, band)
        names.append(sc.name)
        s_n.append(m_n.settling_time)
        s_f.append(m_f.settling_time)
        if (m_n.settling_time is not None and m_f.settling_time is not None
                and m_n.settling_time > 0):
            reds.append(1.0 - m_f.settling_time / m_n.settling_time)
        else:
            reds.append(None)
        mask = log_n.t >= transient
        leq.append(bool(np.all(log_f.stage_cost[mask] <= log_n.stage_cost[mask] + cost_slack)))
        mn.append(m_n)
        mf.append(m_f)
    valid = [r for r in reds if r is not None]
    comparison = SchemeComparison(
        scenarios=names, settling_nmpc=s_n, settling_fmnmpc=s_f,
        reductions=reds, mean_reduction=float(np.mean(valid)) if valid else float("nan"),
        pointwise_cost_leq=leq, metrics_nmpc=mn, metrics_fmnmpc=mf,
    )
    return comparison, logs
