"""DAG task model: types, validation, endpoint normalization, random
layered generation and the JSON file format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import (
    CycleDetected,
    DisconnectedSubtask,
    InfeasibleLayering,
    InvariantViolation,
    MultipleEntries,
    MultipleExits,
    ParseError,
)

VIRTUAL_ENTRY = "__entry__"
VIRTUAL_EXIT = "__exit__"


@dataclass(frozen=True)
class Subtask:
    id: str
    workload: float  # CPU cycles
    virtual: bool = False


@dataclass(frozen=True)
class DagEdge:
    src: str
    dst: str
    data_size: float  # bits


@dataclass
class DagTask:
    subtasks: list[Subtask]
    edges: list[DagEdge]
    # layer index per subtask id, only set by the random generator
    layers: dict[str, int] | None = field(default=None, compare=False)

    @property
    def entry(self) -> str:
        return validate(self).entry_id

    @property
    def exit(self) -> str:
        return validate(self).exit_id

    def edge_set(self):
        return {(e.src, e.dst, e.data_size) for e in self.edges}

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        for s in self.subtasks:
            g.add_node(s.id, workload=s.workload, virtual=s.virtual)
        for e in self.edges:
            g.add_edge(e.src, e.dst, data_size=e.data_size)
        return g


@dataclass(frozen=True)
class DagGenParams:
    n_subtasks: int = 35
    n_layers: int = 10
    ccr: float = 1.0
    workload_mean: float = 3e6
    workload_var: float = 0.2
    data_mean: float = 1.2e6
    data_var: float = 0.2
    max_preds: int = 3

    def check(self):
        if self.n_layers < 2 or self.n_layers > self.n_subtasks:
            raise InfeasibleLayering(
                f"need 2 <= n_layers <= n_subtasks, got {self.n_layers} layers for {self.n_subtasks} subtasks"
            )
        if self.n_layers == 2 and self.n_subtasks > 2:
            raise InfeasibleLayering("two layers hold only entry and exit")
        if not self.ccr > 0:
            raise ValueError("ccr must be positive")
        if self.workload_mean <= 0 or self.data_mean <= 0:
            raise ValueError("means must be positive")
        if self.workload_var < 0 or self.data_var < 0:
            raise ValueError("relative variances must be non-negative")


class ValidatedDag:
    """Index-based, read-only view of a DAG that passed :func:`validate`.

    Subtasks are numbered in a deterministic topological order (ties broken by
    declaration order), so ``index`` doubles as the tie-break order.
    """

    def __init__(self, task: DagTask, order: list[str]):
        self.task = task
        self.ids = tuple(order)
        self.index = {sid: i for i, sid in enumerate(self.ids)}
        by_id = {s.id: s for s in task.subtasks}
        self.workload = [float(by_id[sid].workload) for sid in self.ids]
        self.virtual = [by_id[sid].virtual for sid in self.ids]
        n = len(self.ids)
        preds: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        succs: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        self.data = {}
        for e in task.edges:
            i, j = self.index[e.src], self.index[e.dst]
            preds[j].append((i, float(e.data_size)))
            succs[i].append((j, float(e.data_size)))
            self.data[i, j] = float(e.data_size)
        # (index, bits) pairs, sorted for determinism
        self.pred_data = [tuple(sorted(p)) for p in preds]
        self.succ_data = [tuple(sorted(s)) for s in succs]
        self.preds = [tuple(i for i, _ in p) for p in self.pred_data]
        self.succs = [tuple(i for i, _ in s) for s in self.succ_data]
        self.max_out_data = [max((c for _, c in s), default=0.0) for s in self.succ_data]
        self.entry = next(i for i in range(n) if not self.preds[i])
        self.exit = next(i for i in range(n) if not self.succs[i])

    def __len__(self):
        return len(self.ids)

    @property
    def entry_id(self) -> str:
        return self.ids[self.entry]

    @property
    def exit_id(self) -> str:
        return self.ids[self.exit]

    def pred(self, sid: str) -> set[str]:
        return {self.ids[i] for i in self.preds[self.index[sid]]}

    def succ(self, sid: str) -> set[str]:
        return {self.ids[i] for i in self.succs[self.index[sid]]}


def _structure_checks(task: DagTask):
    seen = set()
    for s in task.subtasks:
        if s.id in seen:
            raise InvariantViolation(f"duplicate subtask id {s.id!r}")
        seen.add(s.id)
        if not math.isfinite(s.workload) or s.workload < 0:
            raise InvariantViolation(f"subtask {s.id!r} has invalid workload {s.workload}")
        if s.workload == 0 and not s.virtual:
            raise InvariantViolation(f"subtask {s.id!r}: zero workload allowed only on virtual endpoints")
    virtual = {s.id for s in task.subtasks if s.virtual}
    pairs = set()
    for e in task.edges:
        if e.src not in seen or e.dst not in seen:
            raise InvariantViolation(f"edge {e.src!r}->{e.dst!r} references an unknown subtask")
        if e.src == e.dst:
            raise CycleDetected([e.src])
        if (e.src, e.dst) in pairs:
            raise InvariantViolation(f"duplicate edge {e.src!r}->{e.dst!r}")
        pairs.add((e.src, e.dst))
        if not math.isfinite(e.data_size) or e.data_size < 0:
            raise InvariantViolation(f"edge {e.src!r}->{e.dst!r} has invalid data size {e.data_size}")
        if e.data_size == 0 and e.src not in virtual and e.dst not in virtual:
            raise InvariantViolation(
                f"edge {e.src!r}->{e.dst!r}: zero data allowed only on edges touching virtual endpoints"
            )


def _topological_order(task: DagTask) -> list[str]:
    g = task.to_networkx()
    position = {s.id: k for k, s in enumerate(task.subtasks)}
    try:
        return list(nx.lexicographical_topological_sort(g, key=position.__getitem__))
    except nx.NetworkXUnfeasible:
        cycle = nx.find_cycle(g)
        raise CycleDetected([u for u, _ in cycle]) from None


def validate(task: DagTask) -> ValidatedDag:
    """Check every DAG invariant and return an indexed handle.

    Raises CycleDetected, MultipleEntries, MultipleExits or
    DisconnectedSubtask naming the offending ids.
    """
    if not task.subtasks:
        raise InvariantViolation("DAG has no subtasks")
    _structure_checks(task)
    order = _topological_order(task)
    has_pred = {e.dst for e in task.edges}
    has_succ = {e.src for e in task.edges}
    sources = [sid for sid in order if sid not in has_pred]
    sinks = [sid for sid in order if sid not in has_succ]
    if len(sources) > 1:
        raise MultipleEntries(sources)
    if len(sinks) > 1:
        raise MultipleExits(sinks)
    g = task.to_networkx()
    reach = nx.descendants(g, sources[0]) | {sources[0]}
    back = nx.ancestors(g, sinks[0]) | {sinks[0]}
    stray = [sid for sid in order if sid not in reach or sid not in back]
    if stray:
        raise DisconnectedSubtask(stray)
    return ValidatedDag(task, order)


def normalize_endpoints(task: DagTask) -> DagTask:
    """Attach a zero-workload virtual entry (exit) when the DAG has several
    sources (sinks). Single-source single-sink graphs come back unchanged."""
    _topological_order(task)
    has_pred = {e.dst for e in task.edges}
    has_succ = {e.src for e in task.edges}
    sources = [s.id for s in task.subtasks if s.id not in has_pred]
    sinks = [s.id for s in task.subtasks if s.id not in has_succ]
    if len(sources) <= 1 and len(sinks) <= 1:
        return task
    subtasks = list(task.subtasks)
    edges = list(task.edges)
    layers = dict(task.layers) if task.layers else None
    if len(sources) > 1:
        subtasks.insert(0, Subtask(VIRTUAL_ENTRY, 0.0, virtual=True))
        edges.extend(DagEdge(VIRTUAL_ENTRY, s, 0.0) for s in sources)
    if len(sinks) > 1:
        subtasks.append(Subtask(VIRTUAL_EXIT, 0.0, virtual=True))
        edges.extend(DagEdge(s, VIRTUAL_EXIT, 0.0) for s in sinks)
    if layers is not None:
        shift = 1 if len(sources) > 1 else 0
        layers = {k: v + shift for k, v in layers.items()}
        if len(sources) > 1:
            layers[VIRTUAL_ENTRY] = 0
        if len(sinks) > 1:
            layers[VIRTUAL_EXIT] = max(layers.values()) + 1
    return DagTask(subtasks, edges, layers)


def _positive_normal(rng: np.random.Generator, mean: float, rel_std: float) -> float:
    # rejection keeps the mean nearly intact at small relative spreads
    while True:
        x = rng.normal(mean, rel_std * mean)
        if x > 0:
            return float(x)


def generate_random_dag(params: DagGenParams, rng: np.random.Generator) -> DagTask:
    """Random layered DAG.

    Layer 1 holds only the entry and the last layer only the exit. The middle
    subtasks are spread over the inner layers with at least one per layer.
    Every non-entry subtask draws 1..max_preds predecessors from the layer
    right above it; subtasks left without a successor are wired to a random
    subtask of the next layer. Edge data is drawn at the CCR=1 anchor and
    scaled linearly by ``params.ccr``.
    """
    params.check()
    n, L = params.n_subtasks, params.n_layers
    sizes = [1] * L
    inner = L - 2
    if inner > 0:
        # uniform composition of the n-2 middle subtasks into inner layers
        cuts = sorted(rng.choice(np.arange(1, n - 2), size=inner - 1, replace=False)) if inner > 1 else []
        bounds = [0, *map(int, cuts), n - 2]
        for k in range(inner):
            sizes[k + 1] = bounds[k + 1] - bounds[k]
    layers: list[list[str]] = []
    counter = 1
    for size in sizes:
        layers.append([f"n{counter + k}" for k in range(size)])
        counter += size

    subtasks = [
        Subtask(sid, _positive_normal(rng, params.workload_mean, params.workload_var))
        for layer in layers
        for sid in layer
    ]
    edge_keys: list[tuple[str, str]] = []
    has_succ: set[str] = set()
    for k in range(1, L):
        above = layers[k - 1]
        for sid in layers[k]:
            cap = min(params.max_preds, len(above))
            count = int(rng.integers(1, cap + 1))
            picks = rng.choice(len(above), size=count, replace=False)
            for p in sorted(int(x) for x in picks):
                edge_keys.append((above[p], sid))
                has_succ.add(above[p])
    for k in range(L - 1):
        below = layers[k + 1]
        for sid in layers[k]:
            if sid not in has_succ:
                dst = below[int(rng.integers(len(below)))]
                edge_keys.append((sid, dst))
                has_succ.add(sid)
    edges = [
        DagEdge(src, dst, _positive_normal(rng, params.data_mean, params.data_var) * params.ccr)
        for src, dst in edge_keys
    ]
    layer_of = {sid: k for k, layer in enumerate(layers) for sid in layer}
    return DagTask(subtasks, edges, layer_of)


def realized_ccr(task: DagTask, mean_rate_bps: float, mean_cpu_hz: float) -> float:
    """Mean edge transfer time at ``mean_rate_bps`` over mean compute time at
    ``mean_cpu_hz``."""
    real = [s.workload for s in task.subtasks if not s.virtual]
    data = [e.data_size for e in task.edges if e.data_size > 0]
    if not real or not data:
        return 0.0
    return (float(np.mean(data)) / mean_rate_bps) / (float(np.mean(real)) / mean_cpu_hz)


# -- file format -------------------------------------------------------------


def dag_to_dict(task: DagTask) -> dict:
    nodes = []
    for s in task.subtasks:
        node = {"id": s.id, "workload_cycles": s.workload}
        if s.virtual:
            node["virtual"] = True
        nodes.append(node)
    return {
        "nodes": nodes,
        "edges": [{"src": e.src, "dst": e.dst, "bits": e.data_size} for e in task.edges],
    }


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError("expected a number", where)
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ParseError("expected a non-negative finite number", where)
    return value


def _string(value, where):
    if not isinstance(value, str) or not value:
        raise ParseError("expected a non-empty string", where)
    return value


def dag_from_dict(doc) -> DagTask:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", "$")
    nodes, edges = doc.get("nodes"), doc.get("edges")
    if not isinstance(nodes, list):
        raise ParseError("missing or non-list 'nodes'", "nodes")
    if not isinstance(edges, list):
        raise ParseError("missing or non-list 'edges'", "edges")
    subtasks, ids = [], set()
    for k, node in enumerate(nodes):
        where = f"nodes[{k}]"
        if not isinstance(node, dict):
            raise ParseError("expected an object", where)
        sid = _string(node.get("id"), f"{where}.id")
        if sid in ids:
            raise ParseError(f"duplicate node id {sid!r}", f"{where}.id")
        ids.add(sid)
        w = _number(node.get("workload_cycles"), f"{where}.workload_cycles")
        subtasks.append(Subtask(sid, w, bool(node.get("virtual", False))))
    out = []
    for k, edge in enumerate(edges):
        where = f"edges[{k}]"
        if not isinstance(edge, dict):
            raise ParseError("expected an object", where)
        src = _string(edge.get("src"), f"{where}.src")
        dst = _string(edge.get("dst"), f"{where}.dst")
        for key, sid in (("src", src), ("dst", dst)):
            if sid not in ids:
                raise ParseError(f"unknown node id {sid!r}", f"{where}.{key}")
        out.append(DagEdge(src, dst, _number(edge.get("bits"), f"{where}.bits")))
    return DagTask(subtasks, out)


def save_dag(task: DagTask, path) -> None:
    Path(path).write_text(json.dumps(dag_to_dict(task), indent=2) + "\n", encoding="utf-8")


def load_dag(path) -> DagTask:
    """Read a DAG file and validate it.

    Raises ParseError for malformed content and an InvariantViolation
    subclass when the graph itself is not a valid DAG task.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}") from None
    task = dag_from_dict(doc)
    validate(task)
    return task
