"""Structured configuration: schema, defaults, presets, (de)serialization.

The config file is JSON with the nested sections below. Every key is
optional and falls back to the documented default; unknown keys are
rejected. `config_to_dict` emits the fully-populated canonical form, so
parse -> serialize -> parse is the identity.

Sections and defaults:

  quadrotor: mass 1.03 [kg], inertia_diag [16.83e-3, 16.83e-3, 28.34e-3]
      [kg m^2], arm_length 0.275 [m], torque_coeff 0.017 [m], rotor_min 0.0
      [N], rotor_max 12.3 [N], gravity 9.81 [m/s^2], thrust_axis [0,0,1].
      The mass/inertia/geometry defaults are representative of a ~1 kg
      vehicle; adjust them to yours.
  ocp: horizon 40, dt 0.01 [s], zeta 1.2 (used by the fast-motion scheme;
      the regulating scheme always runs with zeta = 1), weights {kp 150,
      kv 30, kR 10, komega 0.85, kf 0.05, ktau 0.3, k1 10, k2 1 (alias: k3),
      e1 [1,0,0], e2 [0,1,0]}, equilibrium {xi [0,0,4], Rd identity,
      v [0,0,0], omega [0,0,0]}, state_bounds null (optional boxes
      {xi_lo, xi_hi, v_lo, v_hi, omega_lo, omega_hi}).
  solver: max_iterations 50, max_iterations_warm 15, feas_tol 1e-6,
      opt_tol 1e-4, levenberg 1e-8.
  run: duration 20.0 [s], plant_substeps 10, scheme "both", settling_band
      0.02, plant_mass_scale 1.0, plant_inertia_scale 1.0 (perturb the plant
      truth model only, e.g. 1.05 for a +5% mismatch study).
  certify: dissipativity_samples 200000, random_states 100, seed 0.
  scenarios: list of preset names or explicit {name, xi0, R0, v0, omega0}
      entries; default ["paper-all"]. Initial rotations are polar-projected
      onto SO(3) at ingestion and the projection distance is logged.
  output_dir: "se3nmpc-out" (overridable by the SE3NMPC_OUT env var).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ControlInput, QuadrotorParams, RigidBodyParams, RigidState
from .ocp import (CostWeights, Equilibrium, OcpSpec, StateBounds,
                  hover_equilibrium)
from .simulation import Scenario
from .so3 import AttitudeErrorWeights, rotation_from_matrix
from .solver import SolverConfig


class ConfigError(ValueError):
    """Malformed configuration (unknown key, bad type, bad value)."""


# initial attitudes/positions of the built-in point-to-point scenarios;
# rotations are given to four decimals and projected onto SO(3) at load time
PRESET_STATES = {
    "paper-x01": (
        [[0.1543, 0.9880, 0.0],
         [0.1954, -0.0305, -0.9802],
         [-0.9685, 0.1512, -0.1978]],
        [4.0, 5.0, 7.0],
    ),
    "paper-x02": (
        [[-0.3045, 0.2837, 0.9093],
         [-0.4447, 0.8019, -0.3990],
         [-0.8424, -0.5258, -0.1180]],
        [-4.0, -5.0, 2.0],
    ),
    "paper-x03": (
        [[0.5175, -0.3541, -0.7790],
         [0.8168, 0.4755, 0.3266],
         [0.2548, -0.8053, 0.5353]],
        [-4.0, 5.0, 7.0],
    ),
    "paper-x04": (
        [[0.8660, -0.5000, 0.0],
         [-0.5000, -0.8660, 0.0],
         [0.0, 0.0, -1.0]],
        [3.0, -4.0, 9.0],
    ),
}
PRESET_GROUPS = {
    "paper-all": ["paper-x01", "paper-x02", "paper-x03", "paper-x04"],
    "hover-hold": ["hover-hold"],
}

_DEFAULTS = {
    "quadrotor": {
        "mass": 1.03,
        "inertia_diag": [16.83e-3, 16.83e-3, 28.34e-3],
        "arm_length": 0.275,
        "torque_coeff": 0.017,
        "rotor_min": 0.0,
        "rotor_max": 12.3,
        "gravity": 9.81,
        "thrust_axis": [0.0, 0.0, 1.0],
    },
    "ocp": {
        "horizon": 40,
        "dt": 0.01,
        "zeta": 1.2,
        "weights": {
            "kp": 150.0, "kv": 30.0, "kR": 10.0, "komega": 0.85,
            "kf": 0.05, "ktau": 0.3,
            "k1": 10.0, "k2": 1.0,
            "e1": [1.0, 0.0, 0.0], "e2": [0.0, 1.0, 0.0],
        },
        "equilibrium": {
            "xi": [0.0, 0.0, 4.0],
            "Rd": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            "v": [0.0, 0.0, 0.0],
            "omega": [0.0, 0.0, 0.0],
        },
        "state_bounds": None,
    },
    "solver": {
        "max_iterations": 50,
        "max_iterations_warm": 15,
        "feas_tol": 1e-6,
        "opt_tol": 1e-4,
        "levenberg": 1e-8,
    },
    "run": {
        "duration": 20.0,
        "plant_substeps": 10,
        "scheme": "both",
        "settling_band": 0.02,
        "plant_mass_scale": 1.0,
        "plant_inertia_scale": 1.0,
    },
    "certify": {
        "dissipativity_samples": 200000,
        "random_states": 100,
        "seed": 0,
    },
    "scenarios": ["paper-all"],
    "output_dir": "se3nmpc-out",
}


@dataclass
class Config:
    """Fully-resolved configuration (every field populated)."""

    quadrotor: dict
    ocp: dict
    solver: dict
    run: dict
    certify: dict
    scenarios: list
    output_dir: str
    projection_log: list = field(default_factory=list)

    def quad_params(self) -> QuadrotorParams:
        q = self.quadrotor
        if "inertia" in q and q["inertia"] is not None:
            inertia = np.array(q["inertia"], dtype=float)
        else:
            inertia = np.diag(q["inertia_diag"])
        body = RigidBodyParams(
            mass=q["mass"], inertia=inertia,
            thrust_axis=np.array(q["thrust_axis"], dtype=float),
            gravity=q["gravity"],
        )
        return QuadrotorParams(
            body=body, arm_length=q["arm_length"], torque_coeff=q["torque_coeff"],
            rotor_min=q["rotor_min"], rotor_max=q["rotor_max"],
        )

    def cost_weights(self) -> CostWeights:
        w = self.ocp["weights"]
        att = AttitudeErrorWeights(
            k1=w["k1"], k2=w["k2"],
            e1=np.array(w["e1"], dtype=float), e2=np.array(w["e2"], dtype=float),
        )
        return CostWeights(kp=w["kp"], kv=w["kv"], kR=w["kR"], komega=w["komega"],
                           kf=w["kf"], ktau=w["ktau"], attitude=att)

    def equilibrium(self, quad: QuadrotorParams | None = None) -> Equilibrium:
        quad = quad or self.quad_params()
        e = self.ocp["equilibrium"]
        Rd = rotation_from_matrix(np.array(e["Rd"], dtype=float))
        eq = hover_equilibrium(quad.body, e["xi"])
        if (np.any(np.array(e["v"]) != 0.0) or np.any(np.array(e["omega"]) != 0.0)
                or not np.allclose(Rd, np.eye(3))):
            eq = Equilibrium(
                R_d=Rd, xi_e=np.array(e["xi"], dtype=float),
                v_e=np.array(e["v"], dtype=float),
                omega_e=np.array(e["omega"], dtype=float),
                u_e=ControlInput(thrust=quad.body.hover_thrust, torque=np.zeros(3)),
            )
        return eq

    def ocp_spec(self, quad: QuadrotorParams | None = None) -> OcpSpec:
        quad = quad or self.quad_params()
        sb = self.ocp["state_bounds"]
        bounds = None
        if sb is not None:
            bounds = StateBounds(**{
                k: (np.array(v, dtype=float) if v is not None else None)
                for k, v in sb.items()
            })
        return OcpSpec(
            horizon=self.ocp["horizon"], dt=self.ocp["dt"],
            weights=self.cost_weights(), zeta=self.ocp["zeta"],
            equilibrium=self.equilibrium(quad),
            rotor_bounds=(self.quadrotor["rotor_min"], self.quadrotor["rotor_max"]),
            state_bounds=bounds,
        )

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**self.solver)

    def scenario_list(self, quad: QuadrotorParams | None = None) -> list:
        """Resolve the scenario entries into Scenario objects (scheme is set
        later by the runner)."""
        quad = quad or self.quad_params()
        spec = self.ocp_spec(quad)
        out = []
        for entry in self.scenarios:
            if isinstance(entry, str):
                for name in PRESET_GROUPS.get(entry, [entry]):
                    out.append(self._preset_scenario(name, spec))
            else:
                out.append(self._explicit_scenario(entry, spec))
        return out

    def _preset_scenario(self, name, spec: OcpSpec) -> Scenario:
        if name == "hover-hold":
            x0 = spec.equilibrium.state()
        elif name in PRESET_STATES:
            R_raw, xi0 = PRESET_STATES[name]
            R0, dist = rotation_from_matrix(np.array(R_raw), orthonormalize=True)
            self.projection_log.append({"scenario": name, "projection_distance": dist})
            x0 = RigidState(R=R0, xi=np.array(xi0), omega=np.zeros(3), v=np.zeros(3))
        else:
            raise ConfigError(f"unknown scenario preset {name!r}")
        return Scenario(name=name, x0=x0, spec=spec,
                        duration=self.run["duration"],
                        plant_substeps=self.run["plant_substeps"],
                        plant_mass_scale=self.run["plant_mass_scale"],
                        plant_inertia_scale=self.run["plant_inertia_scale"])

    def _explicit_scenario(self, entry: dict, spec: OcpSpec) -> Scenario:
        allowed = {"name", "xi0", "R0", "v0", "omega0"}
        unknown = set(entry) - allowed
        if unknown:
            raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
        if "name" not in entry or "xi0" not in entry:
            raise ConfigError("explicit scenarios need at least 'name' and 'xi0'")
        R0 = np.array(entry.get("R0", np.eye(3).tolist()), dtype=float)
        R0, dist = rotation_from_matrix(R0, orthonormalize=True)
        self.projection_log.append({"scenario": entry["name"], "projection_distance": dist})
        x0 = RigidState(
            R=R0, xi=np.array(entry["xi0"], dtype=float),
            omega=np.array(entry.get("omega0", [0.0, 0.0, 0.0]), dtype=float),
            v=np.array(entry.get("v0", [0.0, 0.0, 0.0]), dtype=float),
        )
        return Scenario(name=entry["name"], x0=x0, spec=spec,
                        duration=self.run["duration"],
                        plant_substeps=self.run["plant_substeps"],
                        plant_mass_scale=self.run["plant_mass_scale"],
                        plant_inertia_scale=self.run["plant_inertia_scale"])


_STATE_BOUND_KEYS = {"xi_lo", "xi_hi", "v_lo", "v_hi", "omega_lo", "omega_hi"}


def _merge_section(name, defaults, given):
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError(f"section {name!r} must be an object")
    allowed = set(defaults)
    if name == "quadrotor":
        allowed |= {"inertia"}  # full 3x3 instead of the diagonal
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
    merged = copy.deepcopy(defaults)
    for key, val in given.items():
        if key == "weights":
            merged[key] = _merge_weights(val, defaults[key])
        elif key == "state_bounds" and val is not None:
            bad = set(val) - _STATE_BOUND_KEYS
            if bad:
                raise ConfigError(f"unknown keys in ocp.state_bounds: {sorted(bad)}")
            merged[key] = {k: val.get(k) for k in sorted(_STATE_BOUND_KEYS)}
        elif isinstance(defaults.get(key), dict) and isinstance(val, dict):
            bad = set(val) - set(defaults[key])
            if bad:
                raise ConfigError(f"unknown keys in {name}.{key}: {sorted(bad)}")
            merged[key] = {k: val.get(k, d) for k, d in defaults[key].items()}
        else:
            merged[key] = val
    return merged


def _merge_weights(given, defaults):
    allowed = set(defaults) | {"k3"}
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in ocp.weights: {sorted(unknown)}")
    if "k3" in given and "k2" in given:
        raise ConfigError("give either k2 or its alias k3, not both")
    merged = {k: given.get(k, d) for k, d in defaults.items()}
    if "k3" in given:
        merged["k2"] = given["k3"]
    return merged


def load_config(data: dict | None = None) -> Config:
    """Validate a raw dict against the schema and fill defaults."""
    data = dict(data or {})
    unknown = set(data) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    sections = {}
    for name in ("quadrotor", "ocp", "solver", "run", "certify"):
        sections[name] = _merge_section(name, _DEFAULTS[name], data.get(name))
    scheme = sections["run"]["scheme"]
    if scheme not in ("nmpc", "fmnmpc", "both"):
        raise ConfigError("run.scheme must be nmpc, fmnmpc, or both")
    scenarios = data.get("scenarios", list(_DEFAULTS["scenarios"]))
    if not isinstance(scenarios, list):
        raise ConfigError("scenarios must be a list")
    out_dir = data.get("output_dir", _DEFAULTS["output_dir"])
    cfg = Config(
        quadrotor=sections["quadrotor"], ocp=sections["ocp"],
        solver=sections["solver"], run=sections["run"],
        certify=sections["certify"], scenarios=scenarios, output_dir=out_dir,
    )
    # fail fast on bad numerics
    cfg.quad_params()
    cfg.ocp_spec()
    return cfg


def config_to_dict(cfg: Config) -> dict:
    """Canonical fully-populated dict (round-trips through load_config)."""
    return {
        "quadrotor": dict(cfg.quadrotor),
        "ocp": {**cfg.ocp, "weights": dict(cfg.ocp["weights"]),
                "equilibrium": dict(cfg.ocp["equilibrium"])},
        "solver": dict(cfg.solver),
        "run": dict(cfg.run),
        "certify": dict(cfg.certify),
        "scenarios": list(cfg.scenarios),
        "output_dir": cfg.output_dir,
    }


def read_config_file(path) -> Config:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return load_config(data)


def write_config_file(cfg: Config, path):
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")
