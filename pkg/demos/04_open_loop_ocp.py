"""One receding-horizon problem, transcribed and solved.

Starts a metre below the set-point, prints the optimized thrust profile and
the solve statistics, then re-solves warm-started from the shifted solution.

Run:  python demos/04_open_loop_ocp.py
"""

import numpy as np

from se3nmpc import (RigidState, shift_warm_start, solve, step_predictor,
                     transcribe)
from se3nmpc.config import load_config
from se3nmpc.solver import ShootingProblem, eval_defects

cfg = load_config({})
quad = cfg.quad_params()
spec = cfg.ocp_spec(quad).with_zeta(1.0)

x0 = RigidState(R=np.eye(3), xi=spec.equilibrium.xi_e + [0.0, 0.0, -1.0],
                omega=np.zeros(3), v=np.zeros(3))
prob = transcribe(x0, spec, quad)
print(f"horizon {spec.horizon}, dt {spec.dt}s -> "
      f"{12 * spec.horizon} defect equations, {4 * spec.horizon} control unknowns")
print("cold-start defect norm:", np.max(np.abs(eval_defects(prob))))

result = solve(prob)
print(f"\nstatus {result.status.value} in {result.iterations} iterations, "
      f"{1e3 * result.solve_time:.1f} ms")
print(f"objective {result.objective:.3f}, max defect {result.max_defect:.1e}, "
      f"stationarity {result.kkt_residual:.1e}")
print("thrust profile [N], first 10 stages:",
      np.array2string(result.us[:10, 0], precision=2))
print(f"(hover thrust is {quad.body.hover_thrust:.2f} N -> the controller climbs)")
print("predicted final position error:",
      np.linalg.norm(result.xi[-1] - spec.equilibrium.xi_e))

# receding horizon: apply the first control, shift, re-solve warm
x1 = step_predictor(x0, result.first_control, quad.body, spec.dt)
guess = shift_warm_start(result, spec, quad)
warm = solve(ShootingProblem(x0=x1, spec=spec, quad=quad), warm=guess)
print(f"\nwarm re-solve: {warm.iterations} iteration(s), "
      f"{1e3 * warm.solve_time:.1f} ms, status {warm.status.value}")
