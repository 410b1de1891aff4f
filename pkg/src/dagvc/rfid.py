"""Ranking and foresight-integrated dynamic scheduling (RFID).

Three phases run after every commit:

1. dynamic downward ranking over each ready subtask's candidate set,
2. resource-scarcity priority change via the completion-time increment,
3. vehicle choice by degree-weighted earliest finish time.
"""

from __future__ import annotations

import math

import numpy as np

from .base import BaseScheduler
from .errors import EmptyCandidateSet
from .sched import EMPTY_CANDIDATE_SET, Problem, ScheduleFailure, ScheduleState

CTI_MODES = ("absolute", "as_printed", "zero")


def dyn_avg_ct(workload: float, cand_cpu) -> float:
    """Mean computation time of ``workload`` cycles over the candidates' CPUs."""
    cand_cpu = np.asarray(cand_cpu, dtype=float)
    if cand_cpu.size == 0:
        raise EmptyCandidateSet("no candidate vehicles")
    return float(np.mean(workload / cand_cpu))


def dyn_avg_tt(cand_tt) -> float:
    """Mean transfer time of one input edge over the candidates."""
    cand_tt = np.asarray(cand_tt, dtype=float)
    if cand_tt.size == 0:
        raise EmptyCandidateSet("no candidate vehicles")
    return float(np.mean(cand_tt))


def cti(cand_eft) -> float:
    """Best EFT minus the best EFT on any other candidate (always <= 0).

    A single candidate gives -inf: missing it is as costly as it gets.
    """
    cand_eft = np.asarray(cand_eft, dtype=float)
    if cand_eft.size == 0:
        raise EmptyCandidateSet("no candidate vehicles")
    if cand_eft.size == 1:
        return -math.inf
    best = int(np.argmin(cand_eft))
    second = np.min(np.delete(cand_eft, best))
    return float(cand_eft[best] - second)


def rs_rank(rank: float, cti_value: float, mode: str = "absolute") -> float:
    """Scarcity-adjusted rank; the lowest value is scheduled first.

    ``absolute`` subtracts the size of the increment so scarce subtasks move
    forward; ``as_printed`` subtracts the signed (non-positive) increment;
    ``zero`` ignores it and falls back to the plain dynamic rank.
    """
    if mode == "absolute":
        return rank - abs(cti_value)
    if mode == "as_printed":
        return rank - cti_value
    if mode == "zero":
        return rank
    raise ValueError(f"unknown cti mode {mode!r}")


def weighted_eft(eft, degree, alpha_t=1.0, alpha_r=1.0, phi_scale=0.5):
    return alpha_t * np.asarray(eft, dtype=float) - alpha_r * phi_scale * np.asarray(degree, dtype=float)


def rank_d(state: ScheduleState, i: int, ranks: dict) -> float:
    """Dynamic downward rank of ready subtask ``i``; predecessor ranks come
    from ``ranks``. The entry ranks 0."""
    dag = state.dag
    if not dag.preds[i]:
        return 0.0
    cand = state.candidates(i)
    if cand.size == 0:
        raise EmptyCandidateSet(dag.ids[i])
    ct_mean = dyn_avg_ct(dag.workload[i], state.network.cpu[cand])
    t = state.st(i)
    best = -math.inf
    for j, c in dag.pred_data[i]:
        tt = state.network.link_row(t, state.host[j]).tt(c)
        best = max(best, ranks[j] + ct_mean + dyn_avg_tt(tt[cand]))
    return best


def degree_counts(state: ScheduleState, i: int, cand) -> np.ndarray:
    """Size of the degree set of subtask ``i`` on each candidate vehicle."""
    dag = state.dag
    if not dag.succs[i]:
        return np.zeros(len(cand))
    ok = state.network.feasible_matrix(state.st(i), dag.max_out_data[i])
    return ok[cand].sum(axis=1).astype(float)


class RFIDScheduler(BaseScheduler):
    """RFID list scheduler.

    Parameters
    ----------
    alpha_t, alpha_r : float
        Weights on finish time and on the degree (reliability) term.
    phi_scale : float
        Slope of the degree reward, ``phi(x) = phi_scale * x``.
    cti_sign_mode : {"absolute", "as_printed", "zero"}
        How the completion-time increment enters the priority.

    After a run, ``decisions_`` lists one record per commit:
    ``(subtask, candidates, candidate EFTs, chosen vehicle, rank table)``.
    """

    name = "rfid"

    def __init__(self, alpha_t=1.0, alpha_r=1.0, phi_scale=0.5, cti_sign_mode="absolute"):
        self.alpha_t = alpha_t
        self.alpha_r = alpha_r
        self.phi_scale = phi_scale
        self.cti_sign_mode = cti_sign_mode

    def _check_params(self):
        if self.alpha_t < 0 or self.alpha_r < 0 or (self.alpha_t == 0 and self.alpha_r == 0):
            raise ValueError("alpha_t and alpha_r must be non-negative and not both zero")
        if not self.phi_scale > 0:
            raise ValueError("phi_scale must be positive")
        if self.cti_sign_mode not in CTI_MODES:
            raise ValueError(f"cti_sign_mode must be one of {CTI_MODES}")

    def schedule_state(self, problem: Problem, rng=None) -> ScheduleState:
        self._check_params()
        state = ScheduleState(problem)
        dag = problem.dag
        state.commit(dag.entry, problem.owner, check=False)
        ranks = {dag.entry: 0.0}
        decisions = self.decisions_ = []
        while state.ready:
            table = {}
            for i in sorted(state.ready):
                cand = state.candidates(i)
                if cand.size == 0:
                    raise ScheduleFailure(EMPTY_CANDIDATE_SET, i, state.st(i))
                if i not in ranks:
                    ranks[i] = rank_d(state, i, ranks)
                eft = state.est_eft(i)[1][cand]
                inc = cti(eft)
                table[i] = (ranks[i], inc, rs_rank(ranks[i], inc, self.cti_sign_mode))
            pick = min(table, key=lambda k: (table[k][2], k))
            cand = state.candidates(pick)
            eft = state.est_eft(pick)[1][cand]
            if self.alpha_r > 0:
                score = weighted_eft(eft, degree_counts(state, pick, cand), self.alpha_t, self.alpha_r, self.phi_scale)
            else:
                score = self.alpha_t * eft
            m = int(cand[int(np.argmin(score))])
            decisions.append((pick, cand, eft, m, table))
            state.commit(pick, m)
        return state
