"""Closed-loop point-to-point flight, regulating vs fast-motion scheme.

Recovers the vehicle from the upside-down initial attitude and compares the
two schemes' settling behavior (shortened to 8 s to keep the demo quick; the
CLI runs the full four-scenario suite: `se3nmpc run --preset paper-all`).

Run:  python demos/05_point_to_point.py
"""

import dataclasses

import numpy as np

from se3nmpc import compare_schemes
from se3nmpc.config import load_config

cfg = load_config({})
quad = cfg.quad_params()
scenario = [s for s in cfg.scenario_list(quad) if s.name == "paper-x04"][0]
scenario = dataclasses.replace(scenario, duration=8.0)

print("initial attitude (upside down):")
print(np.array2string(scenario.x0.R, precision=3))
print("initial position:", scenario.x0.xi, "-> set-point",
      scenario.spec.equilibrium.xi_e)

comparison, logs = compare_schemes([scenario], quad, cfg.solver_config(),
                                   band=0.02, transient=2.0)

for scheme in ("nmpc", "fmnmpc"):
    log = logs[("paper-x04", scheme)]
    label = "regulating " if scheme == "nmpc" else "fast-motion"
    print(f"\n== {label} scheme ==")
    for t in (0.0, 1.0, 2.0, 4.0, 8.0):
        k = int(round(t / scenario.spec.dt))
        k = min(k, len(log) - 1)
        print(f"  t={t:4.1f}s  pos err {log.pos_err[k]:7.3f} m   "
              f"attitude err {log.psi[k]:8.4f}   "
              f"rotor forces [{log.rotor_forces[k].min():5.2f}, "
              f"{log.rotor_forces[k].max():5.2f}] N")
    print(f"  max rotor force over run: {log.rotor_forces.max():.2f} N "
          f"(bound 12.3 N), infeasible ticks: "
          f"{sum(1 for s in log.status if s == 'infeasible')}")

print("\n== comparison ==")
print(f"settling time (2% band): regulating {comparison.settling_nmpc[0]:.2f} s, "
      f"fast-motion {comparison.settling_fmnmpc[0]:.2f} s")
print(f"relative reduction: {100 * comparison.reductions[0]:.0f}%")
print("fast-motion state-cost curve pointwise below regulating curve after "
      f"the transient: {comparison.pointwise_cost_leq[0]}")
