import os
import sys

import numpy as np
import pytest

from dagvc import ChannelParams, ContactModel, DagGenParams, Network, Problem, TraceParams
from dagvc import generate_random_dag, generate_synthetic_trace
from dagvc.mobility import MobilityTrace

sys.path.insert(0, os.path.dirname(__file__))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running sweeps (acceptance suite)")


def tiny_problem(seed, max_subtasks=6, max_vehicles=4, theta=0.9, ccr=None, region=700.0, horizon=60.0,
                 n_subtasks=None, n_vehicles=None, departure_rate=0.01, owner_stay=None):
    """Small random instance that the exhaustive oracle can handle.

    Vehicles stay for the whole horizon apart from rare departures, and
    nobody joins, so the vehicle count stays at ``max_vehicles`` or below.
    """
    rng = np.random.default_rng(seed)
    n = n_subtasks or int(rng.integers(2, max_subtasks + 1))
    layers = n if n <= 3 else int(rng.integers(3, n + 1))
    if ccr is None:
        ccr = float(rng.choice([0.5, 1.0, 2.0, 4.0]))
    dag = generate_random_dag(DagGenParams(n_subtasks=n, n_layers=layers, ccr=ccr), rng)
    p = n_vehicles or int(rng.integers(2, max_vehicles + 1))
    tp = TraceParams(n_vehicles=p, region=(region, region), horizon=horizon, arrival_rate=0.0, departure_rate=departure_rate)
    trace = generate_synthetic_trace(tp, rng)
    if owner_stay is not None:
        trace = cut_owner(trace, owner_stay)
    return Problem(dag, Network(trace, ChannelParams(theta=theta), ContactModel()))


def cut_owner(trace, stay):
    """Copy of ``trace`` where the owner leaves at ``stay``."""
    samples = {}
    for k, vid in enumerate(trace.ids):
        samples[vid] = (trace._t[k], trace._x[k], trace._y[k])
    ts, xs, ys = samples[trace.owner]
    keep = [k for k, t in enumerate(ts) if t < stay]
    x, y = trace.position(trace.owner, stay)
    samples[trace.owner] = ([ts[k] for k in keep] + [stay], [xs[k] for k in keep] + [x], [ys[k] for k in keep] + [y])
    return MobilityTrace(trace.vehicles, samples, owner=trace.owner, horizon=trace.horizon)


def random_problem(seed, n_subtasks=None, n_vehicles=None, n_layers=None, ccr=1.0):
    """Default-sized random instance (synthetic mobility, kinematic contacts)."""
    rng = np.random.default_rng(seed)
    n = n_subtasks or int(rng.integers(5, 40))
    layers = n_layers or int(rng.integers(3, min(n, 12) + 1))
    dag = generate_random_dag(DagGenParams(n_subtasks=n, n_layers=layers, ccr=ccr), rng)
    p = n_vehicles or int(rng.integers(5, 40))
    trace = generate_synthetic_trace(TraceParams(n_vehicles=p), rng)
    return Problem(dag, Network(trace))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
