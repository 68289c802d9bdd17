"""Command-line entry point: ``qdfss solve|sweep|optimize|export-fields``.

Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
3 solver non-convergence, 4 geometry error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, RunConfig, load_config
from .device import GeometryError
from .excitonics import StageError, evaluate_configuration, round_sig, solve_carriers
from .fields import field_to_csv
from .poisson import ConvergenceError, GateVoltages
from .sweep import (
    QuadrupoleParam,
    matrix_to_csv,
    minimize_fss,
    records_to_csv,
    sweep_grid_asymmetric,
    sweep_lateral,
    sweep_quadrupole,
    trace_to_csv,
)

EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_GEOMETRY = 2, 3, 4


def _gates(args) -> GateVoltages:
    base = QuadrupoleParam(args.quadrupole).to_gates() if args.quadrupole is not None else GateVoltages()
    vals = base.as_dict()
    for name in vals:
        override = getattr(args, f"v_{name}")
        if override is not None:
            vals[name] = override
    return GateVoltages(vals["top"], vals["bottom"], vals["left"], vals["right"])


def _dumps(obj) -> str:
    return json.dumps(round_sig(obj), indent=2) + "\n"


def _out_path(cfg: RunConfig, suffix: str) -> str:
    os.makedirs(cfg.output.directory, exist_ok=True)
    return os.path.join(cfg.output.directory, f"{cfg.output.prefix}_{suffix}")


def cmd_solve(cfg: RunConfig, args) -> int:
    report = evaluate_configuration(cfg.device, cfg.build_grid(), _gates(args), cfg.solver)
    sys.stdout.write(_dumps(report.to_dict()))
    return 0


def _crossings(result):
    return [
        {"lo_V": c.lo, "hi_V": c.hi, "root_V": c.root,
         "beta_at_root": c.report.beta if c.report else None}
        for c in result.crossings
    ]


def cmd_sweep(cfg: RunConfig, args) -> int:
    spec, grid, sw = cfg.device, cfg.build_grid(), cfg.sweep
    summary: dict = {"mode": args.mode}
    if args.mode in ("quadrupole", "lateral"):
        if args.mode == "quadrupole":
            res = sweep_quadrupole(spec, grid, (sw.quad_v_min, sw.quad_v_max), sw.quad_n,
                                   cfg.solver, cfg.workers, sw.refine)
        else:
            res = sweep_lateral(spec, grid, (sw.lat_v_min, sw.lat_v_max), sw.lat_n,
                                cfg.solver, cfg.workers, sw.refine)
        path = _out_path(cfg, f"{args.mode}.csv")
        records_to_csv(res.records, path)
        best = res.minimum()
        summary.update(
            csv=path,
            n_points=len(res.records),
            n_failed=sum(not r.ok for r in res.records),
            zero_crossings=_crossings(res),
            minimum={"v_V": best.params["v"], **best.report.to_dict()} if best else None,
        )
    else:
        gs = sweep_grid_asymmetric(spec, grid, sw.grid_v_fixed, (sw.rl_min, sw.rl_max),
                                   (sw.tb_min, sw.tb_max), sw.rl_n, sw.tb_n,
                                   cfg.solver, cfg.workers)
        flat = [r for row in gs.records for r in row]
        path = _out_path(cfg, "grid.csv")
        records_to_csv(flat, path)
        fss_path = _out_path(cfg, "grid_fss_matrix.csv")
        beta_path = _out_path(cfg, "grid_beta_matrix.csv")
        matrix_to_csv(gs, "fss_ueV", fss_path)
        matrix_to_csv(gs, "beta", beta_path)
        i, j, rec = gs.minimum()
        summary.update(
            csv=path,
            fss_matrix_csv=fss_path,
            beta_matrix_csv=beta_path,
            n_points=len(flat),
            n_failed=sum(not r.ok for r in flat),
            minimum={"delta_v_rl_V": rec.params["delta_v_rl"],
                     "delta_v_tb_V": rec.params["delta_v_tb"], **rec.report.to_dict()},
        )
    text = _dumps(summary)
    with open(_out_path(cfg, f"{args.mode}_summary.json"), "w", newline="\n") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_optimize(cfg: RunConfig, args) -> int:
    o = cfg.optimize
    res = minimize_fss(
        cfg.device, cfg.build_grid(),
        QuadrupoleParam(o.v0, o.delta_v_rl0, o.delta_v_tb0),
        [(o.v_min, o.v_max), (o.rl_min, o.rl_max), (o.tb_min, o.tb_max)],
        settings=cfg.solver, target_fss=o.target_fss, xatol=o.xatol,
        max_evals=o.max_evals, seed=cfg.seed,
    )
    trace_path = _out_path(cfg, "optimize_trace.csv")
    trace_to_csv(res.trace, trace_path)
    out = {
        "v_V": res.param.v,
        "delta_v_rl_V": res.param.delta_v_rl,
        "delta_v_tb_V": res.param.delta_v_tb,
        "converged": res.converged,
        "message": res.message,
        "n_evaluations": len(res.trace),
        "trace_csv": trace_path,
        **res.report.to_dict(),
    }
    text = _dumps(out)
    with open(_out_path(cfg, "optimize.json"), "w", newline="\n") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_export(cfg: RunConfig, args) -> int:
    states = solve_carriers(cfg.device, cfg.build_grid(), _gates(args), cfg.solver)
    if args.what == "potential":
        field = states.potential
    elif args.what == "psi-e":
        field = states.electron.wavefunction.density()
    else:
        field = states.hole.wavefunction.density()
    text = field_to_csv(field, args.output)
    if args.output is None:
        sys.stdout.write(text)
    return 0


def _add_gate_flags(p):
    for name in ("top", "bottom", "left", "right"):
        p.add_argument(f"--v-{name}", type=float, default=None, metavar="V",
                       help=f"{name} gate potential (V)")
    p.add_argument("--quadrupole", type=float, default=None, metavar="V",
                   help="start from the quadrupole configuration V (gate flags override)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdfss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="evaluate one gate configuration, JSON to stdout")
    p.add_argument("--config")
    _add_gate_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run a voltage sweep, write CSV + summary JSON")
    p.add_argument("--config")
    p.add_argument("--mode", choices=("quadrupole", "lateral", "grid"), required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="minimise FSS over (v, dV_RL, dV_TB)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("export-fields", help="dump a potential or density field as CSV")
    p.add_argument("--config")
    p.add_argument("--what", choices=("potential", "psi-e", "psi-h"), required=True)
    p.add_argument("--output", "-o", default=None, help="CSV path (default stdout)")
    _add_gate_flags(p)
    p.set_defaults(func=cmd_export)
    return parser


def _exit_code(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, ConfigError):
        return EXIT_CONFIG
    if isinstance(cause, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(cause, GeometryError):
        return EXIT_GEOMETRY
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(cfg, args)
    except Exception as exc:
        print(f"qdfss {args.command}: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
