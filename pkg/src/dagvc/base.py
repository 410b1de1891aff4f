"""Scheduler base class and input-validation helpers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .channel import ChannelParams, Network
from .dag import DagTask, ValidatedDag
from .mobility import ContactModel, MobilityTrace
from .sched import Problem, Schedule, ScheduleState


class BaseScheduler(BaseEstimator):
    """Hyperparameters live in ``__init__`` (so ``get_params``/``set_params``
    and ``sklearn.base.clone`` work); subclasses implement
    :meth:`schedule_state`, which raises ScheduleFailure when the DAG task
    cannot be completed."""

    name = "base"

    def schedule_state(self, problem: Problem, rng=None) -> ScheduleState:
        raise NotImplementedError

    def schedule(self, problem, rng=None) -> Schedule:
        return self.schedule_state(check_problem(problem), rng=rng).to_schedule()


def check_problem(problem=None, *, dag=None, trace=None, channel=None, contact=None) -> Problem:
    """Coerce the usual inputs into a :class:`Problem`.

    Accepts a ready Problem, or a DAG (DagTask or ValidatedDag) plus a
    MobilityTrace and optional channel/contact parameters.
    """
    if isinstance(problem, Problem):
        return problem
    if problem is not None:
        raise TypeError(f"expected a Problem, got {type(problem).__name__}")
    if not isinstance(dag, (DagTask, ValidatedDag)):
        raise TypeError("dag must be a DagTask or ValidatedDag")
    if not isinstance(trace, MobilityTrace):
        raise TypeError("trace must be a MobilityTrace")
    if channel is not None and not isinstance(channel, ChannelParams):
        raise TypeError("channel must be ChannelParams")
    if contact is not None and not isinstance(contact, ContactModel):
        raise TypeError("contact must be a ContactModel")
    return Problem(dag, Network(trace, channel, contact))


def check_random_state(rng) -> np.random.Generator:
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
