"""Convergence sweeps and checks for coupled subshifts of finite type.

Exit codes: 0 pass, 1 tolerance failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

from .coupling.family import ConstraintViolation
from .experiments import (
    NUMERICAL_ERRORS,
    ConfigError,
    ReportWriteError,
    SweepConfig,
    build_family,
    check_writable,
    emit_report,
    load_config,
    report_from_json,
    run_sweep,
)

EXIT_OK, EXIT_TOL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _config(args, mode: str) -> SweepConfig:
    cfg = load_config(args.config) if args.config else SweepConfig(mode=mode)
    updates = {"mode": mode}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.tol is not None:
        updates["tol"] = args.tol
    if getattr(args, "theta", None) is not None:
        updates["theta"] = args.theta
    if getattr(args, "m", None):
        updates["ms"] = tuple(args.m)
    if getattr(args, "workers", None):
        updates["workers"] = args.workers
    if args.out is not None:
        updates["out"] = args.out
    try:
        return dataclasses.replace(cfg, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _status(rep) -> int:
    if rep.failure is not None:
        return EXIT_NUMERIC if rep.failure.get("numerical", True) else EXIT_CONFIG
    return EXIT_OK if rep.passed else EXIT_TOL


def _finish(rep, out: str | None) -> int:
    if out:
        paths = emit_report(rep, out)
        print("wrote " + ", ".join(paths))
    for name, ok in sorted(rep.checks.items()):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if rep.failure:
        print(f"FAILED at m={rep.failure['m']}: {rep.failure['error']}", file=sys.stderr)
    if rep.floor_reached_at is not None:
        print(f"pressure floor reached at m={rep.floor_reached_at}")
    return _status(rep)


def cmd_sweep(args) -> int:
    mode = args.mode
    if args.config:
        mode = load_config(args.config).mode if args.mode is None else args.mode
    cfg = _config(args, mode or "thm1.2")
    if cfg.mode not in ("thm1.2", "thm2.1"):
        raise ConfigError("sweep runs thm1.2 or thm2.1; use 'geom' or 'verify' for the other modes")
    if args.out:
        check_writable(args.out)
    rep = run_sweep(cfg)
    if rep.rows:
        last = rep.rows[-1]
        print(f"m={last.m} mass_A={last.mass_A!r} target={rep.target!r}")
    return _finish(rep, args.out)


def cmd_geom(args) -> int:
    from fractions import Fraction

    from .geometry import GeometryParams, breakpoint_csv, build_family_map

    cfg = _config(args, "thm1.3")
    if args.out:
        check_writable(args.out)
    rep = run_sweep(cfg)
    code = _finish(rep, args.out)
    if args.out and rep.rows:
        last = rep.rows[-1]
        params = GeometryParams(**{k: Fraction(v) for k, v in cfg.geometry.items()})
        T = build_family_map(params, last["n_m"], last["nprime_m"],
                             bool(cfg.family.get("linked_prefix", True)))
        path = os.path.join(args.out, "breakpoints.csv")
        with open(path, "w") as fh:
            fh.write(breakpoint_csv(T))
        print(f"wrote {path}")
    return code


def cmd_pressure(args) -> int:
    from .coupling.automaton import automaton_operator, build_sigma_m
    from .coupling.induced import InducedBuilder, pressure_by_induction
    from .transfer import perron

    cfg = _config(args, "thm1.2" if not args.config else load_config(args.config).mode)
    fam = build_family(cfg)
    tol = args.tol if args.tol is not None else 1e-9
    worst = 0.0
    lines = ["m,n_m,nprime_m,states,P_m_perron,P_m_induced,difference"]
    for m in cfg.ms:
        aut = build_sigma_m(fam, m)
        p1 = perron(automaton_operator(aut)).pressure
        p2 = pressure_by_induction(InducedBuilder(aut))
        worst = max(worst, abs(p1 - p2))
        lines.append(f"{m},{aut.n},{aut.nprime},{aut.size},{p1!r},{p2!r},{abs(p1 - p2)!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        check_writable(args.out)
        with open(os.path.join(args.out, "pressure.csv"), "w") as fh:
            fh.write(text)
    print(text, end="")
    return EXIT_OK if worst <= tol else EXIT_TOL


def cmd_verify(args) -> int:
    from .acceptance import format_result, run_all

    numbers = [int(x) for x in args.only.split(",")] if args.only else None
    if args.out:
        check_writable(args.out)
    results = run_all(numbers)
    for r in results:
        print(format_result(r))
    summary = {
        "seed": args.seed or 0,
        "criteria": {str(r.number): {"name": r.name, "passed": r.passed, "detail": r.detail} for r in results},
        "passed": sum(r.passed for r in results),
        "failed": sum(not r.passed for r in results),
    }
    if args.out:
        path = os.path.join(args.out, "verify.json")
        with open(path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"{summary['passed']} passed, {summary['failed']} failed")
    return EXIT_OK if summary["failed"] == 0 else EXIT_TOL


def cmd_emit(args) -> int:
    try:
        with open(args.report) as fh:
            rep = report_from_json(fh.read())
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read report {args.report}: {exc}") from exc
    out = args.out or os.path.dirname(os.path.abspath(args.report))
    paths = emit_report(rep, out, args.stem)
    print("wrote " + ", ".join(paths))
    return _status(rep)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coupledsft", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON sweep configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="seed for orbit sampling")
    common.add_argument("--tol", type=float, default=None, help="tolerance on the final mass")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sweep", parents=[common], help="mass split along a coupled family")
    sp.add_argument("--mode", choices=("thm1.2", "thm2.1"), default=None)
    sp.add_argument("--theta", type=float, default=None, help="n_m = ceil(theta n'_m)")
    sp.add_argument("--m", type=int, nargs="+", help="parameter values")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("geom", parents=[common], help="interval-map sweep")
    sp.add_argument("--m", type=int, nargs="+")
    sp.set_defaults(func=cmd_geom)

    sp = sub.add_parser("pressure", parents=[common], help="P_m by Perron and by induction")
    sp.add_argument("--m", type=int, nargs="+")
    sp.set_defaults(func=cmd_pressure)

    sp = sub.add_parser("verify", parents=[common], help="run the acceptance criteria")
    sp.add_argument("--only", help="comma-separated criterion numbers")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("emit", parents=[common], help="rewrite CSV/JSON from a saved report")
    sp.add_argument("report", help="JSON report written by sweep or geom")
    sp.add_argument("--stem", default=None)
    sp.set_defaults(func=cmd_emit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConstraintViolation, ReportWriteError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
