"""DAG task scheduling over a time-varying vehicular cloud."""

from .base import BaseScheduler, check_problem
from .baselines import BruteForceScheduler, HEFTScheduler, LookaheadScheduler, MGAScheduler, heft_rank
from .channel import ChannelParams, Network
from .dag import DagEdge, DagGenParams, DagTask, Subtask, ValidatedDag, generate_random_dag, load_dag, save_dag, validate
from .mobility import ContactModel, MobilityTrace, TraceParams, Vehicle, generate_synthetic_trace
from .rfid import RFIDScheduler
from .sched import Problem, Schedule, ScheduleState, TrialOutcome, run_trial, validate_schedule

__version__ = "0.1.0"

SCHEDULERS = {
    "rfid": RFIDScheduler,
    "heft": HEFTScheduler,
    "la": LookaheadScheduler,
    "mga": MGAScheduler,
}
