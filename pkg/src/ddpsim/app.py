"""Command line entry point.

::

    ddpsim validate    --config cfg.json
    ddpsim steady      --config cfg.json
    ddpsim simulate    --config cfg.json [--force]
    ddpsim sweep-sigma --config cfg.json [--sigmas 0.1 0.01]

Exit codes: 0 success, 1 hypothesis validation failed, 2 runtime or config error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .dynamics import run, sigma_sweep
from .io import checkpoint_save, emit_timeseries, format_float, write_timeseries
from .model import HypothesisError, validate_hypotheses
from .poisson import PoissonSolver
from .steady import solve_steady, steady_residual

logger = logging.getLogger("ddpsim")

EXIT_OK, EXIT_INVALID, EXIT_ERROR = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="ddpsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "steady", "validate", "sweep-sigma"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON config document")
        s.add_argument("--force", action="store_true", help="skip the hypothesis gate")
        s.add_argument("--quiet", action="store_true", help="only errors on stderr")
        if name == "sweep-sigma":
            s.add_argument("--sigmas", type=float, nargs="+", help="override sweep.sigmas")
    return p


def _check_writable(path):
    if path is None:
        return
    parent = Path(str(path).format(index=0)).resolve().parent
    if not parent.is_dir():
        raise OSError(f"output directory {parent} does not exist")


def _gate(model, force) -> bool:
    """True if the run may proceed; prints the report to stderr otherwise."""
    if force:
        return True
    report = validate_hypotheses(model)
    if not report.passed:
        print(report.format(), file=sys.stderr)
    return report.passed


def _checkpoint_name(template: str, index: int) -> str:
    return template.format(index=index) if "{index" in template else template


def cmd_validate(cfg, args):
    model = cfgmod.build_model(cfg)
    report = validate_hypotheses(model)
    print(report.format())
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_steady(cfg, args):
    model = cfgmod.build_model(cfg)
    if not _gate(model, args.force):
        return EXIT_INVALID
    _check_writable(cfg.outputs.checkpoint_path)
    solver = PoissonSolver(model.grid, model.epsilon)
    st = cfg.steady
    eq = solve_steady(model, alpha=cfg.initial.alpha, solver=solver, theta=st.theta,
                      tol=st.tol, max_iter=st.max_iter)
    r_poisson, r_charge, r_mass = steady_residual(eq, model, solver)
    if cfg.outputs.checkpoint_path:
        from .dynamics import CarrierState
        checkpoint_save(CarrierState(0.0, eq.n_inf, eq.p_inf, eq.psi_inf), model.grid,
                        _checkpoint_name(cfg.outputs.checkpoint_path, 0), model.epsilon, eq.alpha)
    print(f"iterations {eq.iterations}")
    for name, value in (("alpha", eq.alpha), ("D_n", eq.D_n), ("D_p", eq.D_p),
                        ("D_n*D_p", eq.D_n * eq.D_p), ("I", eq.I), ("J", eq.J),
                        ("r_poisson", r_poisson), ("r_charge", r_charge),
                        ("r_massaction", r_mass)):
        print(f"{name} {format_float(value)}")
    return EXIT_OK


def cmd_simulate(cfg, args):
    out = cfg.outputs
    _check_writable(out.csv_path)
    _check_writable(out.checkpoint_path)
    try:
        traj = run(cfg, force=args.force)
    except HypothesisError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    if out.csv_path:
        emit_timeseries(traj.reports, out.csv_path)
    else:
        write_timeseries(traj.reports, sys.stdout)
    if out.checkpoint_path:
        m = traj.model
        picks = range(0, len(traj.states), out.checkpoint_every) if out.checkpoint_every else []
        picks = sorted(set(picks) | {len(traj.states) - 1})
        for i in picks:
            checkpoint_save(traj.states[i], m.grid, _checkpoint_name(out.checkpoint_path, i),
                            m.epsilon, traj.steady.alpha)
    logger.info("simulated to t=%.6g in %d steps", traj.states[-1].t, traj.states[-1].step_count)
    return EXIT_OK


def cmd_sweep(cfg, args):
    if not _gate(cfgmod.build_model(cfg), args.force):
        return EXIT_INVALID
    _check_writable(cfg.outputs.csv_path)
    sigmas = args.sigmas or cfg.sweep.sigmas
    rows = sigma_sweep(cfg, sigmas)
    fh = open(cfg.outputs.csv_path, "w", newline="", encoding="utf-8") if cfg.outputs.csv_path \
        else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("sigma", "l1_distance"))
        for sigma, d in rows:
            w.writerow((format_float(sigma), format_float(d)))
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "steady": cmd_steady, "validate": cmd_validate,
            "sweep-sigma": cmd_sweep}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = cfgmod.load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (cfgmod.ConfigError, OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def cli():
    sys.exit(main())


if __name__ == "__main__":
    cli()
