"""Command-line entry point: ``imexwave {run,converge,runtime,stability,snapshots}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .integrators import IntegrationError, integrate

FLAG_TO_FIELD = {
    "problem": "problem",
    "disc": "disc",
    "scheme": "scheme",
    "tau": "tau",
    "tau_list": "tau_list",
    "t_end": "t_end",
    "gamma": "gamma",
    "forcing": "forcing",
    "reference": "reference",
    "out": "out",
    "solver_tol": "solver_tol",
}


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _gamma(text):
    vals = _floats(text)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("--gamma takes r1,r2,eta")
    return vals


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file mirroring RunConfig; flags override it")
    common.add_argument("--problem", help="example1 | example2 | matrix:<dir>")
    common.add_argument("--disc", help="interval:<n> | disc:<level>")
    common.add_argument("--scheme", choices=["cn", "imex", "rimex", "rk4"])
    common.add_argument("--tau", type=float)
    common.add_argument("--tau-list", type=_floats, help="comma-separated halving sequence")
    common.add_argument("--t-end", type=float)
    common.add_argument("--gamma", type=_gamma, help="r1,r2,eta for r1*(r2+t)^eta; omit for zero damping")
    common.add_argument("--forcing", choices=["derived", "printed"])
    common.add_argument("--reference", help="exact | refined:<factor>")
    common.add_argument("--out", help="output directory")
    common.add_argument("--solver-tol", type=float)

    parser = argparse.ArgumentParser(prog="imexwave", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="integrate once and report the final error")
    sub.add_parser("converge", parents=[common], help="temporal convergence study (CSV + SVG)")
    p = sub.add_parser("runtime", parents=[common], help="cost to reach a common error target")
    p.add_argument("--schemes", default="cn,imex,rimex,rk4")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--max-halvings", type=int, default=6)
    p.add_argument("--repeats", type=int, default=1)
    p = sub.add_parser("stability", parents=[common], help="RK4 blow-up probe over a tau list")
    p.add_argument("--blowup-norm", type=float, default=1e6)
    p = sub.add_parser("snapshots", parents=[common], help="VTK snapshots of the displacement")
    p.add_argument("--times", type=_floats, default=[0.0, 0.4, 0.8, 1.2, 1.6, 2.0])
    return parser


def config_from_args(args):
    base = harness.RunConfig.from_json(args.config) if args.config else harness.RunConfig()
    overrides = {f: getattr(args, flag) for flag, f in FLAG_TO_FIELD.items() if getattr(args, flag) is not None}
    return base.replace(**overrides)


def _out_dir(config):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(config, args):
    setup = harness.build_setup(config)
    state, rep = integrate(setup.system, config.scheme_kind, setup.state0, config.tau, config.t_end, tol=config.solver_tol)
    summary = dict(setup.description, scheme=config.scheme_kind.tag.value, tau=config.tau, t_end=state.t,
                   steps=rep.steps, linear_solves=rep.linear_solves, fixed_point_iters=rep.fixed_point_iters,
                   wall_time=rep.wall_time)
    if setup.exact is not None:
        summary["error_vs_exact"] = harness.compute_error(setup.norms, state, setup.exact(state.t))
    out = _out_dir(config)
    (out / "run.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for k, v in summary.items():
        print(f"{k}: {v}")


def cmd_converge(config, args):
    report = harness.convergence_study(config)
    out = _out_dir(config)
    stem = out / f"converge_{config.scheme_kind.tag.short}"
    harness.emit_csv(report, stem.with_suffix(".csv"))
    harness.emit_metadata(report, stem.with_suffix(".json"))
    harness.emit_svg_loglog(report, stem.with_suffix(".svg"))
    print(f"{'tau':>12} {'error':>12} {'order':>7} {'solves':>7}  status")
    for r in report.rows:
        order = "" if r.observed_order is None else f"{r.observed_order:.3f}"
        print(f"{r.tau:12.5g} {r.error:12.4e} {order:>7} {r.linear_solves:7d}  {r.status}")
    print(f"wrote {stem}.csv/.json/.svg")


def cmd_runtime(config, args):
    schemes = [s for s in args.schemes.split(",") if s]
    table = harness.runtime_compare(config, schemes, args.target, args.max_halvings, args.repeats)
    out = _out_dir(config)
    path = harness.emit_runtime_csv(table, out / "runtime.csv")
    print(f"{'scheme':>6} {'tau':>10} {'error':>11} {'wall[s]':>9} {'solves':>8} {'per step':>8}  status")
    for r in table:
        tau = "" if r.tau is None else f"{r.tau:.4g}"
        print(f"{r.scheme:>6} {tau:>10} {r.error:11.4e} {r.wall_time:9.3f} {r.linear_solves:8d} "
              f"{r.solves_per_step:8.2f}  {r.status}")
    print(f"wrote {path}")


def cmd_stability(config, args):
    taus = config.tau_list or [config.tau * 2.0**-k for k in range(6)]
    rows = harness.probe_rk4_stability(config, taus, args.blowup_norm)
    out = _out_dir(config)
    path = out / "stability.csv"
    lines = ["tau,stable,blowup_step,max_norm"]
    for r in rows:
        lines.append(f"{float(r.tau)!r},{r.stable},{'' if r.blowup_step is None else r.blowup_step},{float(r.max_norm)!r}")
        print(f"tau={r.tau:<10.4g} " + ("stable" if r.stable else f"blow-up at step {r.blowup_step}"))
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path}")


def cmd_snapshots(config, args):
    setup, states = harness.run_snapshots(config, args.times)
    if setup.mesh is None:
        raise SystemExit("snapshots need a mesh-based problem")
    out = _out_dir(config)
    paths = harness.emit_vtk_snapshots(states, setup.mesh, out / f"snapshot_{config.scheme_kind.tag.short}")
    for st, p in zip(states, paths):
        print(f"t={st.t:.3f} -> {p}")


COMMANDS = {
    "run": cmd_run,
    "converge": cmd_converge,
    "runtime": cmd_runtime,
    "stability": cmd_stability,
    "snapshots": cmd_snapshots,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        COMMANDS[args.command](config, args)
    except (ValueError, OSError, IntegrationError) as exc:
        print(f"imexwave: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
