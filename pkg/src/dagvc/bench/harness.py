"""Sweep runner, aggregation and result files.

Every (axis value, trial) pair gets its own seed sequence, so an instance
depends only on the base seed and its position in the sweep. All schedulers
run on the same instance. Rows come back in (axis value, trial, scheduler)
order whatever the degree of parallelism.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..baselines import HEFTScheduler, LookaheadScheduler, MGAScheduler
from ..channel import Network
from ..dag import generate_random_dag
from ..errors import EmptyInput
from ..mobility import generate_synthetic_trace, load_trace_csv
from ..rfid import RFIDScheduler
from ..sched import Problem, run_trial
from .config import ExperimentConfig

CSV_HEADER = [
    "scheduler",
    "axis",
    "value",
    "seed",
    "n_subtasks",
    "n_vehicles",
    "n_layers",
    "ccr",
    "otc_s",
    "success",
    "sched_runtime_ms",
]


@dataclass
class MetricsRow:
    scheduler: str
    axis: str
    value: float
    seed: int  # trial index within the cell
    n_subtasks: int
    n_vehicles: int
    n_layers: int
    ccr: float
    otc_s: float | None
    success: int
    sched_runtime_ms: float | None
    failure_cause: str | None = None

    def csv_fields(self):
        return [
            self.scheduler,
            self.axis,
            _num(self.value),
            str(self.seed),
            str(self.n_subtasks),
            str(self.n_vehicles),
            str(self.n_layers),
            _num(self.ccr),
            "" if self.otc_s is None else repr(float(self.otc_s)),
            str(self.success),
            "" if self.sched_runtime_ms is None else f"{self.sched_runtime_ms:.3f}",
        ]


def _num(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def make_scheduler(name, cfg: ExperimentConfig):
    if name == "rfid":
        return RFIDScheduler(**cfg.rfid)
    if name == "heft":
        return HEFTScheduler()
    if name == "la":
        return LookaheadScheduler()
    if name == "mga":
        return MGAScheduler(**cfg.mga)
    raise ValueError(f"unknown scheduler {name!r}")


_TRACE_CACHE: dict = {}


def _file_trace(cfg):
    key = (cfg.trace_csv, cfg.vehicles_csv)
    if key not in _TRACE_CACHE:
        _TRACE_CACHE[key] = load_trace_csv(cfg.trace_csv, cfg.vehicles_csv)
    return _TRACE_CACHE[key]


def instance_seed(cfg: ExperimentConfig, axis_idx: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.base_seed, spawn_key=(axis_idx, trial))


def build_instance(cfg: ExperimentConfig, axis_idx: int, trial: int) -> Problem:
    """The DAG and trace of one sweep cell and trial."""
    value = cfg.values[axis_idx]
    gen_ss, _ = instance_seed(cfg, axis_idx, trial).spawn(2)
    rng = np.random.default_rng(gen_ss)
    dag = generate_random_dag(cfg.dag_params(value), rng)
    if cfg.trace_csv:
        trace = _file_trace(cfg)
    else:
        trace = generate_synthetic_trace(cfg.trace_params(value), rng)
    return Problem(dag, Network(trace, cfg.channel, cfg.contact))


def run_cell_trial(cfg: ExperimentConfig, axis_idx: int, trial: int) -> list[MetricsRow]:
    problem = build_instance(cfg, axis_idx, trial)
    _, sched_ss = instance_seed(cfg, axis_idx, trial).spawn(2)
    value = cfg.values[axis_idx]
    shape = cfg.cell(value)
    shape["n_vehicles"] = problem.n_vehicles if cfg.trace_csv else shape["n_vehicles"]
    rows = []
    for name in cfg.schedulers:
        # each scheduler gets the same fresh stream
        rng = np.random.default_rng(sched_ss)
        out = run_trial(problem, make_scheduler(name, cfg), rng=rng)
        rows.append(
            MetricsRow(
                scheduler=name,
                axis=cfg.axis,
                value=value,
                seed=trial,
                otc_s=out.otc if out.success else None,
                success=int(out.success),
                sched_runtime_ms=out.sched_runtime * 1e3 if cfg.timing else None,
                failure_cause=out.failure_cause,
                **shape,
            )
        )
    return rows


def _run_chunk(args):
    cfg, jobs = args
    return [run_cell_trial(cfg, a, t) for a, t in jobs]


def n_workers() -> int:
    cap = os.environ.get("DAGVC_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> list[MetricsRow]:
    """Every scheduler on every (axis value, trial) instance."""
    cfg.check()
    jobs = [(a, t) for a in range(len(cfg.values)) for t in range(cfg.trials)]
    workers = n_workers() if workers is None else workers
    if workers <= 1 or len(jobs) < 2:
        results = [run_cell_trial(cfg, a, t) for a, t in jobs]
    else:
        size = max(1, math.ceil(len(jobs) / (workers * 4)))
        chunks = [(cfg, jobs[k : k + size]) for k in range(0, len(jobs), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for part in pool.map(_run_chunk, chunks) for r in part]
    return [row for rows in results for row in rows]


def aggregate(rows) -> dict:
    """Per (scheduler, value): mean OTC over successes, success rate over all
    trials, mean runtime and the normal-approximation 95% CI half width of
    the OTC mean. Independent of row order."""
    rows = list(rows)
    if not rows:
        raise EmptyInput("no rows to aggregate")
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.scheduler, r.value), []).append(r)
    out = {}
    for key in sorted(groups, key=lambda k: (k[0], float(k[1]))):
        g = groups[key]
        otc = sorted(r.otc_s for r in g if r.success)
        rt = sorted(r.sched_runtime_ms for r in g if r.sched_runtime_ms is not None)
        k = len(otc)
        mean = math.fsum(otc) / k if k else None
        if k > 1:
            var = math.fsum((x - mean) ** 2 for x in otc) / (k - 1)
            ci = 1.96 * math.sqrt(var / k)
        else:
            ci = 0.0 if k else None
        out[key] = {
            "trials": len(g),
            "successes": k,
            "success_rate": k / len(g),
            "mean_otc": mean,
            "ci95_otc": ci,
            "mean_runtime_ms": math.fsum(rt) / len(rt) if rt else None,
        }
    return out


def write_results(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.csv_fields())


def read_results(path) -> list[MetricsRow]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError("unexpected results header")
        for f in reader:
            num = lambda s: float(s) if any(c in s for c in ".en") else int(s)  # noqa: E731
            out.append(
                MetricsRow(
                    scheduler=f[0],
                    axis=f[1],
                    value=num(f[2]),
                    seed=int(f[3]),
                    n_subtasks=int(f[4]),
                    n_vehicles=int(f[5]),
                    n_layers=int(f[6]),
                    ccr=float(f[7]),
                    otc_s=float(f[8]) if f[8] else None,
                    success=int(f[9]),
                    sched_runtime_ms=float(f[10]) if f[10] else None,
                )
            )
    return out


def write_summary(summary: dict, path, cfg: ExperimentConfig | None = None) -> None:
    nested: dict = {}
    for (sched, value), stats in summary.items():
        nested.setdefault(sched, {})[_num(value)] = stats
    doc = {"axis": cfg.axis if cfg else None, "base_seed": cfg.base_seed if cfg else None, "results": nested}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
