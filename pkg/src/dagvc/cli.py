"""Command line entry point.

Exit codes: 0 success, 1 bad configuration or input content, 2 file I/O
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .baselines import BruteForceScheduler
from .bench.config import SCHEDULER_NAMES, ExperimentConfig, load_config
from .bench.harness import aggregate, run_sweep, write_results, write_summary
from .channel import Network
from .dag import DagGenParams, generate_random_dag, load_dag, save_dag, validate
from .errors import ConfigError, DagVcError
from .mobility import TraceParams, generate_synthetic_trace, load_trace_csv, save_trace_csv
from .sched import Problem, Schedule, ScheduleFailure, validate_schedule

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="dagvc", description="DAG task scheduling over vehicular clouds")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a Monte Carlo sweep")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default="results")
    r.add_argument("--seed", type=int)
    r.add_argument("--schedulers", help=f"comma list out of {','.join(SCHEDULER_NAMES)}")
    r.add_argument("--trials", type=int)
    r.add_argument("--no-timing", action="store_true", help="leave the runtime column empty (byte-stable output)")

    g = sub.add_parser("gen-dag", help="write a random DAG task as JSON")
    g.add_argument("--subtasks", type=int, default=35)
    g.add_argument("--layers", type=int, default=10)
    g.add_argument("--ccr", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    t = sub.add_parser("gen-trace", help="write a random-waypoint trace as CSV")
    t.add_argument("--vehicles", type=int, default=30)
    t.add_argument("--horizon", type=float, default=120.0)
    t.add_argument("--arrival-rate", type=float, default=0.15, help="vehicles joining per second")
    t.add_argument("--departure-rate", type=float, default=0.005, help="per vehicle per second")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.add_argument("--vehicles-out", help="vehicle metadata CSV (default: <out stem>_vehicles.csv)")

    v = sub.add_parser("validate", help="check a DAG file, and a schedule against a trace")
    v.add_argument("--dag", required=True)
    v.add_argument("--trace")
    v.add_argument("--vehicles")
    v.add_argument("--schedule")
    v.add_argument("--config", help="INI file whose [channel] and [vc] sections apply")

    o = sub.add_parser("oracle", help="optimal schedule of a tiny instance by exhaustive search")
    o.add_argument("--dag", required=True)
    o.add_argument("--trace", required=True)
    o.add_argument("--vehicles")
    o.add_argument("--config")
    o.add_argument("--out", help="write the schedule JSON here")
    return p


def _vehicles_path(trace_path, given):
    if given:
        return given
    stem, _ = os.path.splitext(trace_path)
    return f"{stem}_vehicles.csv"


def save_schedule(schedule: Schedule, path) -> None:
    doc = {"order": schedule.order, "vehicle": schedule.vehicle, "est": schedule.est, "eft": schedule.eft}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_schedule(path) -> Schedule:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DagVcError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    try:
        return Schedule(vehicle=dict(doc["vehicle"]), est=dict(doc["est"]), eft=dict(doc["eft"]), order=list(doc["order"]))
    except (KeyError, TypeError) as exc:
        raise DagVcError(f"{path}: schedule needs order, vehicle, est and eft ({exc})") from None


def _problem(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    trace = load_trace_csv(args.trace, _vehicles_path(args.trace, args.vehicles))
    return Problem(load_dag(args.dag), Network(trace, cfg.channel, cfg.contact))


def _cmd_run(args):
    if not os.path.isfile(args.config):
        raise ConfigError(f"config file not found: {args.config}")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.schedulers:
        cfg.schedulers = [s.strip() for s in args.schedulers.split(",") if s.strip()]
    if args.trials is not None:
        cfg.trials = args.trials
    if args.no_timing:
        cfg.timing = False
    cfg.check()
    rows = run_sweep(cfg)
    os.makedirs(args.out, exist_ok=True)
    write_results(rows, os.path.join(args.out, "results.csv"))
    write_summary(aggregate(rows), os.path.join(args.out, "summary.json"), cfg)
    print(f"{len(rows)} rows written to {args.out}")


def _cmd_gen_dag(args):
    params = DagGenParams(n_subtasks=args.subtasks, n_layers=args.layers, ccr=args.ccr)
    try:
        params.check()
    except ValueError as exc:
        raise DagVcError(str(exc)) from None
    save_dag(generate_random_dag(params, np.random.default_rng(args.seed)), args.out)


def _cmd_gen_trace(args):
    params = TraceParams(
        n_vehicles=args.vehicles,
        horizon=args.horizon,
        arrival_rate=args.arrival_rate,
        departure_rate=args.departure_rate,
    )
    try:
        params.check()
    except ValueError as exc:
        raise DagVcError(str(exc)) from None
    trace = generate_synthetic_trace(params, np.random.default_rng(args.seed))
    save_trace_csv(trace, args.out, _vehicles_path(args.out, args.vehicles_out))


def _cmd_validate(args):
    dag = validate(load_dag(args.dag))
    print(f"dag ok: {len(dag)} subtasks, entry {dag.entry_id}, exit {dag.exit_id}")
    if not args.schedule:
        return EXIT_OK
    if not args.trace:
        raise DagVcError("--schedule needs --trace")
    report = validate_schedule(load_schedule(args.schedule), _problem(args))
    for v in report.violations:
        print(f"{v.constraint}: {v.subtask}: {v.detail}", file=sys.stderr)
    if not report.ok:
        return EXIT_CONFIG
    print(f"schedule ok: otc {report.otc:.6f} s")
    return EXIT_OK


def _cmd_oracle(args):
    problem = _problem(args)
    try:
        state = BruteForceScheduler().schedule_state(problem)
    except ScheduleFailure as f:
        print(f"infeasible: {f.cause}")
        return EXIT_OK
    schedule = state.to_schedule()
    if args.out:
        save_schedule(schedule, args.out)
    print(f"optimal otc {schedule.otc:.6f} s")
    for sid in schedule.order:
        print(f"  {sid} -> {schedule.vehicle[sid]}  [{schedule.est[sid]:.6f}, {schedule.eft[sid]:.6f}]")
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "gen-dag": _cmd_gen_dag,
    "gen-trace": _cmd_gen_trace,
    "validate": _cmd_validate,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        code = COMMANDS[args.cmd](args)
    except OSError as exc:
        print(f"dagvc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DagVcError, ValueError) as exc:
        print(f"dagvc: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
