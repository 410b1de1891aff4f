"""Comparison schedulers: HEFT, one-step lookahead, a modified genetic
algorithm and an exhaustive oracle for tiny instances.

HEFT and LA pick vehicles without looking at link reliability. Their
transfers are checked afterwards: if the chosen vehicle cannot reliably
receive every input, the trial fails.
"""

from __future__ import annotations

import math

import numpy as np

from .base import BaseScheduler, check_random_state
from .errors import InstanceTooLarge
from .sched import (
    EMPTY_CANDIDATE_SET,
    EXECUTOR_DEPARTED,
    LINK_FAILURE,
    TOL,
    Problem,
    ScheduleFailure,
    ScheduleState,
)

# -- static ranks -------------------------------------------------------------


def downward_rank(dag, ct_bar, tt_bar) -> np.ndarray:
    """rank(n) = max over preds p of rank(p) + ct_bar[n] + tt_bar(p, n, c).

    ``dag`` is a ValidatedDag (indices are topological), ``tt_bar`` a callable
    of ``(p, n, bits)``. The entry ranks 0.
    """
    n = len(dag)
    rank = np.zeros(n)
    for i in range(n):
        if dag.preds[i]:
            rank[i] = max(rank[j] + ct_bar[i] + tt_bar(j, i, c) for j, c in dag.pred_data[i])
    return rank


def upward_rank(dag, ct_bar, tt_bar) -> np.ndarray:
    """Mirror of :func:`downward_rank` walking successors; the exit ranks 0.

    The downward ranks of a DAG equal these ranks on its transpose.
    """
    n = len(dag)
    rank = np.zeros(n)
    for i in reversed(range(n)):
        if dag.succs[i]:
            rank[i] = max(rank[j] + ct_bar[i] + tt_bar(i, j, c) for j, c in dag.succ_data[i])
    return rank


def static_averages(problem: Problem):
    """Mean computation times over vehicles present at t0 and the mean
    effective rate (bits/s) over ordered linked pairs at t0."""
    net, t0 = problem.network, problem.t0
    present = np.flatnonzero(net.present(t0))
    ct_bar = np.array([w * np.mean(1.0 / net.cpu[present]) for w in problem.dag.workload])
    rates = []
    for a in present:
        row = net.link_row(t0, int(a))
        mask = row.linked.copy()
        mask[a] = False
        rates.extend(1.0 / row.spb[mask])
    rate_bar = float(np.mean(rates)) if rates else math.inf
    return ct_bar, rate_bar


def heft_rank(problem: Problem) -> np.ndarray:
    ct_bar, rate_bar = static_averages(problem)
    return downward_rank(problem.dag, ct_bar, lambda p, n, c: c / rate_bar)


def _posthoc_c3(state: ScheduleState, i: int, m: int):
    cand = state.candidate_mask(i)
    if not cand.any():
        raise ScheduleFailure(EMPTY_CANDIDATE_SET, i, state.st(i))
    if not cand[m]:
        raise ScheduleFailure(LINK_FAILURE, i, state.st(i))


class HEFTScheduler(BaseScheduler):
    """Static downward ranks, then min-EFT over every present vehicle."""

    name = "heft"

    def _choose(self, state, i):
        eft = state.est_eft(i)[1]
        return int(np.argmin(eft))

    def schedule_state(self, problem: Problem, rng=None) -> ScheduleState:
        rank = heft_rank(problem)
        self.rank_ = rank
        state = ScheduleState(problem)
        state.commit(problem.dag.entry, problem.owner, check=False)
        while state.ready:
            i = min(state.ready, key=lambda k: (rank[k], k))
            eft = state.est_eft(i)[1]
            if not np.isfinite(eft).any():
                raise ScheduleFailure(EMPTY_CANDIDATE_SET, i, state.st(i))
            m = self._choose(state, i)
            _posthoc_c3(state, i, m)
            state.commit(i, m)
        return state


class LookaheadScheduler(HEFTScheduler):
    """HEFT ordering; each vehicle is scored by the worst best-case finish
    time among the subtask's successors if it ran there.

    The successor estimate is optimistic: predecessors of a successor that
    are not placed yet are ignored, and transfers and presence use the link
    state at the current subtask's scheduling time.
    """

    name = "la"

    def _choose(self, state, i):
        dag, net = state.dag, state.network
        eft_i = state.est_eft(i)[1]
        options = np.flatnonzero(np.isfinite(eft_i))
        if not dag.succs[i]:
            return int(options[np.argmin(eft_i[options])])
        t = state.st(i)
        spb = net.spb_matrix(t)
        present = net.present(t)
        a_i = eft_i[options]
        # avail[m, v]: vehicle v's free time if i runs on options[m]
        avail = np.tile(state.avail, (len(options), 1))
        avail[np.arange(len(options)), options] = a_i
        score = np.full(len(options), -np.inf)
        for s, c_is in dag.succ_data[i]:
            base = np.full(net.n, state.problem.t0)
            for j, c in dag.pred_data[s]:
                if j != i and state.host[j] >= 0:
                    base = np.maximum(base, state.aft[j] + c * spb[state.host[j]])
            r = np.maximum(base[None, :], a_i[:, None] + c_is * spb[options])
            eft = np.maximum(avail, r) + dag.workload[s] / net.cpu[None, :]
            eft = np.where(present[None, :] & ~np.isnan(eft), eft, np.inf)
            score = np.maximum(score, eft.min(axis=1))
        return int(options[int(np.argmin(score))])


# -- genetic algorithm ----------------------------------------------------------


def decode(problem: Problem, genes) -> float:
    """OTC of chromosome ``genes`` (vehicle index per subtask index), or inf
    when some subtask lands on an absent vehicle, a transfer breaks the QoS
    threshold or an executor leaves before finishing."""
    dag, net = problem.dag, problem.network
    tr = net.trace
    arr, dep, cpu = tr.arrival, tr.departure, net.cpu
    avail = np.maximum(arr, problem.t0).tolist()
    aft = [0.0] * len(dag)
    theta = net.channel.theta
    for i in range(len(dag)):
        m = int(genes[i])
        preds = dag.pred_data[i]
        st = max((aft[j] for j, _ in preds), default=problem.t0)
        if not arr[m] <= st <= dep[m]:
            return math.inf
        ready = problem.t0
        for j, c in preds:
            h = int(genes[j])
            tt = 0.0
            if h != m and c > 0:
                if not arr[h] <= st <= dep[h]:
                    return math.inf
                spb, mu, linked = net.pair(st, h, m)
                tt = c * spb
                if not linked or math.exp(-tt * mu) < theta:
                    return math.inf
            ready = max(ready, aft[j] + tt)
        eft = max(avail[m], ready) + dag.workload[i] / cpu[m]
        if dep[m] < eft - TOL:
            return math.inf
        avail[m] = aft[i] = eft
    return aft[dag.exit]


def replay(problem: Problem, genes) -> ScheduleState:
    """Commit a chromosome in topological order; raises ScheduleFailure
    naming the first broken subtask."""
    state = ScheduleState(problem)
    dag = problem.dag
    state.commit(dag.entry, int(genes[dag.entry]), check=False)
    for i in range(len(dag)):
        if i == dag.entry:
            continue
        m = int(genes[i])
        cand = state.candidate_mask(i)
        if not cand.any():
            raise ScheduleFailure(EMPTY_CANDIDATE_SET, i, state.st(i))
        if not state.network.present(state.st(i))[m]:
            raise ScheduleFailure(EXECUTOR_DEPARTED, i, state.st(i))
        if not cand[m]:
            raise ScheduleFailure(LINK_FAILURE, i, state.st(i))
        state.commit(i, m)
    return state


class MGAScheduler(BaseScheduler):
    """Integer-encoded GA over subtask-to-vehicle maps.

    Single-point crossover on topological position, followed by a repair
    that re-draws any gene past the cut whose predecessors before the cut
    came from disagreeing parents. ``seed_chromosome`` (vehicle indices)
    replaces the random initial population when given.
    """

    name = "mga"

    def __init__(self, population=50, generations=100, crossover_rate=0.8, mutation_rate=0.1, elite=2,
                 seed_chromosome=None):
        self.population = population
        self.generations = generations
        self.crossover_rate = crossover_rate
        self.mutation_rate = mutation_rate
        self.elite = elite
        self.seed_chromosome = seed_chromosome

    def _check_params(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if not (0 <= self.crossover_rate <= 1 and 0 <= self.mutation_rate <= 1):
            raise ValueError("rates must lie in [0, 1]")
        if not 0 <= self.elite < self.population:
            raise ValueError("elite must be below the population size")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")

    def schedule_state(self, problem: Problem, rng=None) -> ScheduleState:
        self._check_params()
        rng = check_random_state(rng)
        dag = problem.dag
        n = len(dag)
        pool = np.flatnonzero(problem.network.present(problem.t0))
        cache: dict = {}

        def fitness(g):
            key = g.tobytes()
            f = cache.get(key)
            if f is None:
                f = cache[key] = decode(problem, g)
            return f

        def draw(size):
            return pool[rng.integers(len(pool), size=size)]

        if self.seed_chromosome is not None:
            seed = np.asarray(self.seed_chromosome, dtype=np.int64)
            pop = np.tile(seed, (self.population, 1))
        else:
            pop = draw((self.population, n)).astype(np.int64)
        pop[:, dag.entry] = problem.owner
        fit = np.array([fitness(g) for g in pop])

        for _ in range(self.generations):
            order = np.argsort(fit, kind="stable")
            children = [pop[k].copy() for k in order[: self.elite]]
            while len(children) < self.population:
                a, b = self._tournament(rng, fit), self._tournament(rng, fit)
                c1, c2 = pop[a].copy(), pop[b].copy()
                if n > 2 and rng.random() < self.crossover_rate:
                    cut = int(rng.integers(1, n))
                    c1, c2 = self._cross(dag, pop[a], pop[b], cut, draw), self._cross(dag, pop[b], pop[a], cut, draw)
                for c in (c1, c2):
                    if rng.random() < self.mutation_rate:
                        k = int(rng.integers(n))
                        if k != dag.entry:
                            c[k] = draw(1)[0]
                    c[dag.entry] = problem.owner
                    if len(children) < self.population:
                        children.append(c)
            pop = np.array(children)
            fit = np.array([fitness(g) for g in pop])

        best = pop[int(np.argmin(fit))]
        self.best_chromosome_ = best.copy()
        self.best_fitness_ = float(fit.min())
        self.evaluations_ = len(cache)
        return replay(problem, best)

    @staticmethod
    def _tournament(rng, fit):
        a, b = rng.integers(len(fit), size=2)
        return int(a if fit[a] <= fit[b] else b)

    @staticmethod
    def _cross(dag, head, tail, cut, draw):
        child = np.concatenate([head[:cut], tail[cut:]])
        for j in range(cut, len(child)):
            if any(p < cut and head[p] != tail[p] for p in dag.preds[j]):
                child[j] = draw(1)[0]
        return child


# -- exhaustive oracle ----------------------------------------------------------

MAX_BF_SUBTASKS = 7
MAX_BF_VEHICLES = 5


class BruteForceScheduler(BaseScheduler):
    """Optimal append-only schedule by depth-first search over commit
    sequences (ready subtask, vehicle). Branches that cannot beat the
    incumbent are cut; swapping two adjacent independent commits on
    different vehicles gives the same schedule, so only one order is kept.
    """

    name = "brute_force"

    def __init__(self, max_subtasks=MAX_BF_SUBTASKS, max_vehicles=MAX_BF_VEHICLES):
        self.max_subtasks = max_subtasks
        self.max_vehicles = max_vehicles

    def schedule_state(self, problem: Problem, rng=None) -> ScheduleState:
        dag, net = problem.dag, problem.network
        n, p = len(dag), net.n
        if n > self.max_subtasks or p > self.max_vehicles:
            raise InstanceTooLarge(f"{n} subtasks x {p} vehicles exceeds {self.max_subtasks} x {self.max_vehicles}")
        tr = net.trace
        arr, dep, cpu = tr.arrival, tr.departure, net.cpu
        theta = net.channel.theta
        pair_cache: dict = {}

        def link(t, h, m, c):
            key = (t, h, m)
            v = pair_cache.get(key)
            if v is None:
                v = pair_cache[key] = net.pair(t, h, m)
            spb, mu, linked = v
            tt = c * spb
            return tt, linked and math.exp(-tt * mu) >= theta

        host = [-1] * n
        aft = [0.0] * n
        avail = np.maximum(arr, problem.t0).tolist()
        remaining = [len(x) for x in dag.preds]
        best = {"otc": math.inf, "seq": None, "empty": False}
        seq = []

        def options(i):
            st = max((aft[j] for j in dag.preds[i]), default=problem.t0)
            out, any_ok = [], False
            for m in range(p):
                if not arr[m] <= st <= dep[m]:
                    continue
                ready, ok = problem.t0, True
                for j, c in dag.pred_data[i]:
                    h = host[j]
                    tt = 0.0
                    if h != m and c > 0:
                        if not arr[h] <= st <= dep[h]:
                            ok = False
                            break
                        tt, ok = link(st, h, m, c)
                        if not ok:
                            break
                    ready = max(ready, aft[j] + tt)
                if not ok:
                    continue
                any_ok = True
                eft = max(avail[m], ready) + dag.workload[i] / cpu[m]
                if dep[m] < eft - TOL:
                    continue
                out.append((m, eft))
            if not any_ok:
                best["empty"] = True
            return out

        def dfs(ready, last):
            if not ready:
                otc = aft[dag.exit]
                if otc < best["otc"]:
                    best["otc"], best["seq"] = otc, list(seq)
                return
            for i in sorted(ready):
                for m, eft in options(i):
                    if last is not None:
                        li, lm = last
                        if m != lm and i < li and i not in dag.succs[li]:
                            continue
                    if eft >= best["otc"]:
                        continue
                    old = avail[m]
                    host[i], aft[i], avail[m] = m, eft, eft
                    seq.append((i, m))
                    nxt = set(ready)
                    nxt.discard(i)
                    for s in dag.succs[i]:
                        remaining[s] -= 1
                        if remaining[s] == 0:
                            nxt.add(s)
                    dfs(nxt, (i, m))
                    for s in dag.succs[i]:
                        remaining[s] += 1
                    seq.pop()
                    host[i], aft[i], avail[m] = -1, 0.0, old

        e = dag.entry
        entry_opts = [o for o in options(e) if o[0] == problem.owner]
        if entry_opts:
            m, eft = entry_opts[0]
            host[e], aft[e], avail[m] = m, eft, eft
            seq.append((e, m))
            ready = set()
            for s in dag.succs[e]:
                remaining[s] -= 1
                if remaining[s] == 0:
                    ready.add(s)
            dfs(ready, (e, m))
        if best["seq"] is None:
            raise ScheduleFailure(EMPTY_CANDIDATE_SET if best["empty"] else EXECUTOR_DEPARTED, None, None)
        self.best_otc_ = best["otc"]
        state = ScheduleState(problem)
        for i, m in best["seq"]:
            state.commit(i, m, check=(i != e))
        return state
