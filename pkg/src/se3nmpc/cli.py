"""Command-line entry point: certificate checks and batch experiment runs.

    se3nmpc certify [--config C] [--out DIR] [--seed N]
    se3nmpc run [--config C] [--preset NAME] [--scheme nmpc|fmnmpc|both]
                [--out DIR] [--seed N]

Exit codes: 0 success, 1 config error, 2 certificate failure, 3 at least one
closed-loop tick reported an infeasible solve (partial outputs are kept).
Stdout carries only the summary table; everything else goes to files in the
output directory (flag --out, else the SE3NMPC_OUT env var, else the config).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .config import (Config, ConfigError, load_config, read_config_file)
from .ocp import validate_equilibrium
from .simulation import compare_schemes, compute_metrics, run_closed_loop
from .stability import (certify_controllability, check_gain_conditions,
                        sample_dissipativity)


def _output_dir(args, cfg: Config) -> Path:
    if args.out:
        out = args.out
    elif os.environ.get("SE3NMPC_OUT"):
        out = os.environ["SE3NMPC_OUT"]
    else:
        out = cfg.output_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_certify(args) -> int:
    cfg = _load(args)
    out = _output_dir(args, cfg)
    quad = cfg.quad_params()
    spec = cfg.ocp_spec(quad)
    seed = args.seed if args.seed is not None else cfg.certify["seed"]

    gains = check_gain_conditions(spec.weights)
    rank = certify_controllability(
        quad, spec.dt, steps=4, n_random=cfg.certify["random_states"], seed=seed,
        equilibrium_input=spec.equilibrium.u_e,
    )
    dissip = sample_dissipativity(
        spec.weights, quad, n_samples=cfg.certify["dissipativity_samples"], seed=seed,
    )
    eq_residual = validate_equilibrium(spec.equilibrium, quad.body, spec.dt)

    passed = gains.passed and rank.passed and dissip.passed
    report = {
        "gain_conditions": gains.as_dict(),
        "controllability": rank.as_dict(),
        "dissipativity": dissip.as_dict(),
        "equilibrium_fixed_point_residual": eq_residual,
        "passed": bool(passed),
    }
    with open(out / "certify.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")

    rows = [
        ("kv*kf", f"{gains.kv_kf:.6g}", ">= 0.25", "pass" if gains.translational_ok else "FAIL"),
        ("komega*ktau", f"{gains.komega_ktau:.6g}", ">= 0.25", "pass" if gains.rotational_ok else "FAIL"),
        ("rank(4-step)", str(rank.rank_at_equilibrium), ">= 12", "pass" if rank.rank_at_equilibrium >= 12 else "FAIL"),
        (f"rank(4-step) over {rank.n_random_states} states", str(rank.min_rank_random), ">= 12",
         "pass" if rank.min_rank_random >= 12 else "FAIL"),
        (f"max(h1,h2) over {dissip.n_samples} samples",
         f"{max(dissip.max_h1, dissip.max_h2):.3e}", "<= 1e-09", "pass" if dissip.passed else "FAIL"),
    ]
    _print_table(("certificate", "value", "requirement", "status"), rows)
    return 0 if passed else 2


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _output_dir(args, cfg)
    if args.preset:
        cfg.scenarios = [args.preset]
    scheme = args.scheme or cfg.run["scheme"]
    quad = cfg.quad_params()
    solver_cfg = cfg.solver_config()
    scenarios = cfg.scenario_list(quad)
    band = cfg.run["settling_band"]

    infeasible = 0
    rows = []
    if scheme == "both":
        comparison, logs = compare_schemes(scenarios, quad, solver_cfg, band=band)
        for (name, sch), log in logs.items():
            log.write_csv(out / f"{name}_{sch}.csv")
        for metrics in comparison.metrics_nmpc + comparison.metrics_fmnmpc:
            _write_metrics(out, metrics)
            infeasible += metrics.infeasible_ticks
        with open(out / "comparison.json", "w") as fh:
            json.dump(comparison.as_dict(), fh, indent=2)
            fh.write("\n")
        for i, name in enumerate(comparison.scenarios):
            red = comparison.reductions[i]
            rows.append((
                name,
                _fmt_settle(comparison.settling_nmpc[i]),
                _fmt_settle(comparison.settling_fmnmpc[i]),
                f"{100 * red:.1f}%" if red is not None else "n/a",
            ))
        rows.append(("mean", "", "", f"{100 * comparison.mean_reduction:.1f}%"))
        header = ("scenario", "settle nmpc [s]", "settle fmnmpc [s]", "reduction")
    else:
        header = ("scenario", "scheme", "settle [s]", "final pos err [m]")
        for sc in scenarios:
            variant = dataclasses.replace(sc, scheme=scheme)
            log = run_closed_loop(variant, quad, solver_cfg)
            log.write_csv(out / f"{sc.name}_{scheme}.csv")
            metrics = compute_metrics(log, variant, quad, band)
            _write_metrics(out, metrics)
            infeasible += metrics.infeasible_ticks
            rows.append((sc.name, scheme, _fmt_settle(metrics.settling_time),
                         f"{metrics.final_pos_err:.4f}"))

    table = _print_table(header, rows)
    with open(out / "settling_times.txt", "w") as fh:
        fh.write(table)
    if cfg.projection_log:
        with open(out / "attitude_projection.json", "w") as fh:
            json.dump(cfg.projection_log, fh, indent=2)
            fh.write("\n")
    return 3 if infeasible else 0


def _fmt_settle(value):
    return f"{value:.3f}" if value is not None else "not settled"


def _write_metrics(out: Path, metrics):
    with open(out / f"{metrics.scenario}_{metrics.scheme}_metrics.json", "w") as fh:
        json.dump(metrics.as_dict(), fh, indent=2)
        fh.write("\n")


def _print_table(header, rows) -> str:
    widths = [max(len(str(header[i])), *(len(str(r[i])) for r in rows)) if rows else len(header[i])
              for i in range(len(header))]
    lines = ["  ".join(str(h).ljust(widths[i]) for i, h in enumerate(header))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(str(c).ljust(widths[i]) for i, c in enumerate(r)))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    return text


def _load(args) -> Config:
    if args.config:
        return read_config_file(args.config)
    return load_config({})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="se3nmpc",
        description="Manifold-aware NMPC certificates and closed-loop experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a JSON config file")
        p.add_argument("--out", help="output directory (overrides SE3NMPC_OUT and config)")
        p.add_argument("--seed", type=int, help="seed for sampling-based certificates")

    p_cert = sub.add_parser("certify", help="run gain, controllability, and dissipativity certificates")
    common(p_cert)

    p_run = sub.add_parser("run", help="execute closed-loop scenarios and emit logs/metrics")
    common(p_run)
    p_run.add_argument("--preset", help="scenario preset (paper-x01..x04, paper-all, hover-hold)")
    p_run.add_argument("--scheme", choices=["nmpc", "fmnmpc", "both"],
                       help="which scheme(s) to run (default from config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "certify":
            return cmd_certify(args)
        return cmd_run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
