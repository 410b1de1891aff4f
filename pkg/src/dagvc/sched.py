"""Scheduling calculus shared by every scheduler.

:class:`ScheduleState` keeps the assignment, finish times, per-vehicle
availability and the ready frontier, and evaluates ready/start/finish times
over all vehicles at once. :func:`validate_schedule` recomputes a finished
schedule from scratch with the scalar channel functions and checks it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .channel import Network
from .dag import DagTask, ValidatedDag, validate
from .errors import AlreadyAssigned, InfeasibleVehicle, PredecessorUnassigned, VehicleAbsent

EMPTY_CANDIDATE_SET = "EmptyCandidateSet"
OWNER_ABSENT = "OwnerAbsent"
EXECUTOR_DEPARTED = "ExecutorDeparted"
LINK_FAILURE = "LinkFailure"  # a committed transfer breaks the QoS threshold

TOL = 1e-9


class ScheduleFailure(Exception):
    """Raised by a scheduler when the DAG task cannot be completed."""

    def __init__(self, cause, subtask=None, time=None):
        self.cause, self.subtask, self.time = cause, subtask, time
        super().__init__(f"{cause} at subtask {subtask} (t={time})")


class Problem:
    """One scheduling instance: a validated DAG over a network."""

    def __init__(self, dag, network: Network):
        self.dag: ValidatedDag = dag if isinstance(dag, ValidatedDag) else validate(dag)
        self.network = network
        self.trace = network.trace
        self.owner = network.trace.owner_index
        self.t0 = network.trace.horizon[0]

    @property
    def n_subtasks(self):
        return len(self.dag)

    @property
    def n_vehicles(self):
        return self.network.n


@dataclass
class Schedule:
    """Committed assignment with per-subtask times, keyed by ids.

    ``order`` is the commit sequence, which fixes the execution order on each
    vehicle.
    """

    vehicle: dict
    est: dict
    eft: dict
    order: list

    @property
    def aft(self):
        return self.eft

    @property
    def otc(self):
        return max(self.eft.values())


class ScheduleState:
    def __init__(self, problem: Problem):
        self.problem = problem
        self.dag = problem.dag
        self.network = problem.network
        n = len(self.dag)
        self.host = [-1] * n
        self.est = [math.nan] * n
        self.aft = [math.nan] * n
        # a vehicle cannot compute before it joins the VC
        self.avail = np.maximum(self.network.trace.arrival.copy(), problem.t0)
        self.remaining = [len(p) for p in self.dag.preds]
        self.ready = {self.dag.entry}
        self.order: list[int] = []
        self._w_over_f = {}
        self._st, self._rt, self._cand = {}, {}, {}

    # -- times -------------------------------------------------------------

    def _need_preds(self, i):
        if self.remaining[i] > 0:
            raise PredecessorUnassigned(f"{self.dag.ids[i]} has unassigned predecessors")

    def st(self, i) -> float:
        """Scheduling time: latest predecessor finish (trial start for the entry)."""
        t = self._st.get(i)
        if t is None:
            self._need_preds(i)
            preds = self.dag.preds[i]
            t = max((self.aft[j] for j in preds), default=self.problem.t0)
            self._st[i] = t
        return t

    def ct(self, i):
        """Computation times of subtask ``i`` on every vehicle."""
        v = self._w_over_f.get(i)
        if v is None:
            v = self.dag.workload[i] / self.network.cpu
            self._w_over_f[i] = v
        return v

    def rt(self, i):
        """Ready time on every vehicle (NaN where input cannot arrive)."""
        r = self._rt.get(i)
        if r is None:
            t = self.st(i)
            r = np.full(self.network.n, self.problem.t0)
            for j, c in self.dag.pred_data[i]:
                row = self.network.link_row(t, self.host[j])
                r = np.maximum(r, self.aft[j] + row.tt(c))
            self._rt[i] = r
        return r

    def est_eft(self, i):
        """``(est, eft)`` vectors; vehicles absent at st get +inf."""
        est = np.maximum(self.avail, self.rt(i))
        eft = est + self.ct(i)
        absent = ~self.network.present(self.st(i))
        if absent.any():
            est = np.where(absent, np.inf, est)
            eft = np.where(absent, np.inf, eft)
        return est, np.nan_to_num(eft, nan=np.inf, posinf=np.inf)

    def candidate_mask(self, i):
        """Vehicles that reliably receive every predecessor output at st."""
        m = self._cand.get(i)
        if m is None:
            t = self.st(i)
            m = self.network.present(t).copy()
            theta = self.network.channel.theta
            for j, c in self.dag.pred_data[i]:
                m &= self.network.link_row(t, self.host[j]).feasible(c, theta)
            self._cand[i] = m
        return m

    def candidates(self, i) -> np.ndarray:
        return np.flatnonzero(self.candidate_mask(i))

    # -- commit ------------------------------------------------------------

    def commit(self, i, m, check=True):
        """Place subtask ``i`` on vehicle ``m`` and advance the frontier.

        With ``check`` the vehicle must be in the candidate set.
        """
        if self.host[i] >= 0:
            raise AlreadyAssigned(self.dag.ids[i])
        self._need_preds(i)
        if check and not self.candidate_mask(i)[m]:
            raise InfeasibleVehicle(f"{self.network.trace.ids[m]} cannot host {self.dag.ids[i]}")
        if not self.network.present(self.st(i))[m]:
            raise InfeasibleVehicle(f"{self.network.trace.ids[m]} absent at st of {self.dag.ids[i]}")
        r = self.rt(i)[m]
        est = max(self.avail[m], r)
        eft = est + self.dag.workload[i] / self.network.cpu[m]
        self.record(i, m, float(est), float(eft))

    def record(self, i, m, est, eft):
        """Low-level commit of precomputed times (no checks)."""
        self.host[i] = m
        self.est[i] = est
        self.aft[i] = eft
        self.avail[m] = eft
        self.order.append(i)
        self.ready.discard(i)
        for s in self.dag.succs[i]:
            self.remaining[s] -= 1
            if self.remaining[s] == 0:
                self.ready.add(s)

    @property
    def done(self) -> bool:
        return len(self.order) == len(self.dag)

    @property
    def otc(self) -> float:
        return self.aft[self.dag.exit]

    def to_schedule(self) -> Schedule:
        ids, vids = self.dag.ids, self.network.trace.ids
        return Schedule(
            vehicle={ids[i]: vids[self.host[i]] for i in self.order},
            est={ids[i]: self.est[i] for i in self.order},
            eft={ids[i]: self.aft[i] for i in self.order},
            order=[ids[i] for i in self.order],
        )

    # -- id-level conveniences -------------------------------------------------

    def scheduling_time(self, sid) -> float:
        return self.st(self.dag.index[sid])

    def ready_time(self, sid, vid) -> float:
        i, m = self.dag.index[sid], self.network.trace.index[vid]
        if not self.network.present(self.st(i))[m]:
            raise VehicleAbsent(vid)
        return float(self.rt(i)[m])

    def est_eft_on(self, sid, vid):
        i, m = self.dag.index[sid], self.network.trace.index[vid]
        est, eft = self.est_eft(i)
        return float(est[m]), float(eft[m])

    def commit_ids(self, sid, vid, check=True):
        self.commit(self.dag.index[sid], self.network.trace.index[vid], check=check)


def first_departure(state: ScheduleState):
    """Earliest subtask whose executor leaves the VC before finishing, or None."""
    dep = state.network.trace.departure
    worst = None
    for i in state.order:
        m = state.host[i]
        if dep[m] < state.aft[i] - TOL and (worst is None or dep[m] < worst[1]):
            worst = (i, float(dep[m]))
    return worst


# -- outcome --------------------------------------------------------------------


@dataclass
class TrialOutcome:
    otc: float | None
    success: bool
    failure_cause: str | None
    sched_runtime: float
    failed_subtask: str | None = None
    failed_time: float | None = None
    schedule: Schedule | None = field(default=None, repr=False)


def run_trial(problem: Problem, scheduler, rng=None, check=False) -> TrialOutcome:
    """Drive ``scheduler`` on ``problem``; failures are returned as data.

    ``sched_runtime`` covers the scheduler's decision loop only. With
    ``check`` a successful schedule is re-validated and an AssertionError is
    raised if it breaks any constraint.
    """
    trace = problem.trace
    if not trace.is_present(trace.owner, problem.t0):
        return TrialOutcome(None, False, OWNER_ABSENT, 0.0, problem.dag.entry_id, problem.t0)
    start = time.perf_counter()
    try:
        state = scheduler.schedule_state(problem, rng=rng)
    except ScheduleFailure as f:
        elapsed = time.perf_counter() - start
        sid = problem.dag.ids[f.subtask] if isinstance(f.subtask, int) else f.subtask
        return TrialOutcome(None, False, f.cause, elapsed, sid, f.time)
    elapsed = time.perf_counter() - start
    gone = first_departure(state)
    if gone is not None:
        return TrialOutcome(None, False, EXECUTOR_DEPARTED, elapsed, problem.dag.ids[gone[0]], gone[1])
    schedule = state.to_schedule()
    if check:
        report = validate_schedule(schedule, problem)
        assert report.ok, report.violations
    return TrialOutcome(float(state.otc), True, None, elapsed, schedule=schedule)


# -- independent validation ------------------------------------------------------


@dataclass
class Violation:
    constraint: str  # C1, C2, C3, order, presence, overlap, recompute
    subtask: str | None
    detail: str


@dataclass
class ScheduleReport:
    violations: list
    est: dict
    eft: dict

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def otc(self):
        return max(self.eft.values()) if self.eft else None

    def failed(self, constraint) -> bool:
        return any(v.constraint == constraint for v in self.violations)


def validate_schedule(schedule: Schedule, problem: Problem, tol=TOL) -> ScheduleReport:
    """Recompute every start/finish time from the assignment and commit order
    and check C1 (one vehicle per subtask), C2 (precedence), C3 (link QoS of
    every cross-vehicle input), presence, per-vehicle non-overlap and that the
    stored times match the recomputation."""
    dag, net = problem.dag, problem.network
    trace, params = net.trace, net.channel
    out: list[Violation] = []

    ids = set(dag.ids)
    assigned = set(schedule.vehicle)
    for sid in sorted(ids - assigned):
        out.append(Violation("C1", sid, "not assigned"))
    for sid in sorted(assigned - ids):
        out.append(Violation("C1", sid, "unknown subtask"))
    for sid, vid in schedule.vehicle.items():
        if vid not in trace.index:
            out.append(Violation("C1", sid, f"unknown vehicle {vid!r}"))
    if len(schedule.order) != len(set(schedule.order)) or set(schedule.order) != assigned:
        out.append(Violation("C1", None, "commit order is not a permutation of the assigned subtasks"))
    if out:
        return ScheduleReport(out, {}, {})

    # stored-value precedence check
    for sid in schedule.order:
        parents = dag.pred(sid)
        if parents:
            need = max(schedule.eft[p] for p in parents)
            if schedule.est[sid] < need - tol:
                out.append(Violation("C2", sid, f"starts at {schedule.est[sid]} before parents finish at {need}"))

    done: set = set()
    avail = {vid: max(float(trace.arrival[k]), problem.t0) for k, vid in enumerate(trace.ids)}
    est, eft = {}, {}
    for sid in schedule.order:
        parents = dag.pred(sid)
        if not parents <= done:
            out.append(Violation("order", sid, "committed before a predecessor"))
            return ScheduleReport(out, est, eft)
        vid = schedule.vehicle[sid]
        st = max((eft[p] for p in parents), default=problem.t0)
        if not trace.is_present(vid, st):
            out.append(Violation("presence", sid, f"{vid} absent at st={st}"))
            return ScheduleReport(out, est, eft)
        ready = problem.t0
        for p in sorted(parents):
            src = schedule.vehicle[p]
            c = dag.data[dag.index[p], dag.index[sid]]
            if src != vid and c > 0:
                if not trace.is_present(src, st):
                    out.append(Violation("C3", sid, f"sender {src} of {p} absent at st={st}"))
                    return ScheduleReport(out, est, eft)
                if not ch.link_feasible(c, src, vid, st, trace, params, net.contact):
                    out.append(Violation("C3", sid, f"input from {p} on {src} fails the QoS threshold"))
                tt = ch.transmission_time(c, src, vid, st, trace, params, enforce_range=False)
            else:
                tt = 0.0
            ready = max(ready, eft[p] + tt)
        start = max(avail[vid], ready)
        finish = start + dag.workload[dag.index[sid]] / trace.vehicle(vid).cpu_speed
        avail[vid] = finish
        est[sid], eft[sid] = start, finish
        done.add(sid)
        if start < st - tol:
            out.append(Violation("C2", sid, "recomputed start precedes a parent finish"))
        if trace.departure[trace.index[vid]] < finish - tol:
            out.append(Violation("presence", sid, f"{vid} leaves before finishing"))
        for key, mine, theirs in (("est", start, schedule.est[sid]), ("eft", finish, schedule.eft[sid])):
            if not abs(mine - theirs) <= tol:
                out.append(Violation("recompute", sid, f"stored {key} {theirs} != recomputed {mine}"))

    by_vehicle: dict = {}
    for sid in schedule.order:
        by_vehicle.setdefault(schedule.vehicle[sid], []).append((schedule.est[sid], schedule.eft[sid], sid))
    for vid, spans in by_vehicle.items():
        spans.sort()
        for (s0, f0, a), (s1, f1, b) in zip(spans, spans[1:]):
            if s1 < f0 - tol:
                out.append(Violation("overlap", b, f"{b} overlaps {a} on {vid}"))
    return ScheduleReport(out, est, eft)


def recompute_times(schedule: Schedule, problem: Problem):
    """Recomputed ``(est, eft)`` dicts for a schedule (see validate_schedule)."""
    report = validate_schedule(schedule, problem)
    return report.est, report.eft
