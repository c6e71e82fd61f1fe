"""Manifold-aware NMPC for underactuated rigid bodies on SE(3).

A numpy/scipy library providing: SO(3) primitives, rigid-body and quadrotor
dynamics, geometric discretizations, receding-horizon optimal control with a
multiple-shooting SQP solver, numeric stability certificates, and a
closed-loop simulation harness with two control schemes (regulating and
fast-motion).
"""

from .dynamics import (ControlInput, QuadrotorParams, RigidBodyParams,
                       RigidState, RotorForces, continuous_dynamics,
                       mix_rotor_forces, saturate_rotor_forces, total_force,
                       unmix_wrench)
from .integrator import step_plant, step_predictor
from .ocp import (CostWeights, Equilibrium, ErrorVector, OcpSpec, StateBounds,
                  error_vector, horizon_cost, hover_equilibrium, input_cost,
                  stage_cost, state_error_cost, validate_equilibrium)
from .simulation import (ClosedLoopLog, Metrics, NotSettled, Scenario,
                         SchemeComparison, compare_schemes, compute_metrics,
                         run_closed_loop, settling_time)
from .so3 import (AttitudeErrorWeights, CayleySingular, NotRotation,
                  NotSkewSymmetric, attitude_error, attitude_error_gradient,
                  cayley, cayley_inverse, expm_so3, project_to_so3,
                  rotation_from_matrix, skew, unskew)
from .solver import (InitialGuess, ShootingProblem, SolveResult, SolveStatus,
                     SolverConfig, shift_warm_start, solve, transcribe)
from .stability import (DissipativityReport, GainCheck, LinearizedModel,
                        RankCertificate, certify_controllability,
                        check_gain_conditions, controllability_matrix,
                        controllability_rank, discretize_linear,
                        dissipativity_residuals, kinetic_energy, linearize,
                        sample_dissipativity, storage_function)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
