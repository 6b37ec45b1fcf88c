"""Quality of a process tree with respect to a log.

Fitness is token-based replay averaged per trace. Precision counts
escaping edges over replayed prefixes, simplicity is the inverse arc
degree of the net, and generalization penalises rarely fired transitions.
The formulas follow PM4Py's token-based variants.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .event_log import EventLog
from .petri import PetriNet, to_petri_net
from .process_tree import ProcessTree

MAX_SILENT_STATES = 10_000
# mean arc degree at which simplicity starts to drop below 1
SIMPLICITY_DEGREE_ALLOWANCE = 2.0


@dataclass(frozen=True)
class ReplayResult:
    produced: int
    consumed: int
    missing: int
    remaining: int

    @property
    def fitness(self) -> float:
        return trace_fitness(self.produced, self.consumed, self.missing, self.remaining)


def trace_fitness(produced, consumed, missing, remaining) -> float:
    f = 0.5 * (1.0 - missing / consumed if consumed else 1.0)
    return f + 0.5 * (1.0 - remaining / produced if produced else 1.0)


@dataclass
class LogReplay:
    variants: list[tuple[str, ...]]
    weights: np.ndarray
    stats: np.ndarray  # (variants, 4): produced, consumed, missing, remaining
    fires: np.ndarray  # (variants, transitions)

    def results(self) -> list[ReplayResult]:
        return [ReplayResult(*map(int, row)) for row in self.stats]

    def trace_fitness(self) -> np.ndarray:
        p, c, m, r = (self.stats[:, i].astype(float) for i in range(4))
        return 0.5 * (1.0 - m / c) + 0.5 * (1.0 - r / p)

    def fitness(self) -> float:
        total = self.weights.sum()
        if total == 0:
            return 1.0
        return float(np.dot(self.weights, self.trace_fitness()) / total)

    def transition_occurrences(self) -> np.ndarray:
        return self.weights @ self.fires


def replay(net: PetriNet, log: EventLog) -> LogReplay:
    """Replay every distinct variant once and weight by multiplicity."""
    counts = log.variants()
    variants = sorted(counts)
    weights = np.array([counts[v] for v in variants], dtype=np.int64)
    activities = sorted(log.alphabet | {t.label for t in net.transitions if t.label is not None})
    pre, post, tlabel, source, sink = net.incidence(activities)
    index = {a: i for i, a in enumerate(activities)}
    flat, offsets = _kernels.encode_traces(variants, index)
    stats, fires = _kernels.replay_variants(pre, post, tlabel, source, sink, flat, offsets,
                                            MAX_SILENT_STATES)
    return LogReplay(variants, weights, stats, fires)


def _net(model) -> PetriNet:
    return model if isinstance(model, PetriNet) else to_petri_net(model)


def replay_fitness(model: PetriNet | ProcessTree, log: EventLog) -> float:
    """Mean per-trace token-replay fitness in [0, 1]."""
    return replay(_net(model), log).fitness()


def precision(model: PetriNet | ProcessTree, log: EventLog) -> float:
    """1 - escaping / allowed activations over the prefixes of the log.

    Each non-empty proper prefix that replays without missing tokens
    contributes the visible activities the model enables after it
    (silent moves allowed); those never observed after that prefix in the
    log escape. The empty prefix contributes once per trace.
    """
    net = _net(model)
    if len(log) == 0:
        return 1.0
    activities = sorted(log.alphabet | {t.label for t in net.transitions if t.label is not None})
    code = {a: i for i, a in enumerate(activities)}
    pre, post, tlabel, source, sink = net.incidence(activities)
    engine = _kernels.PythonReplayer(pre, post, tlabel, source, sink, MAX_SILENT_STATES)

    prefix_count: dict[tuple, int] = {}
    followers: dict[tuple, set] = {}
    starts = set()
    for trace, w in log.variants().items():
        enc = tuple(code[a] for a in trace)
        starts.add(enc[0])
        for i in range(1, len(enc)):
            p = enc[:i]
            prefix_count[p] = prefix_count.get(p, 0) + w
            followers.setdefault(p, set()).add(enc[i])

    n = len(log)
    enabled0 = engine.visible_enabled(engine.initial)
    allowed = n * len(enabled0)
    escaping = n * len(enabled0 - starts)

    states = {(): engine.start()}
    for p in sorted(prefix_count, key=len):
        parent = states.get(p[:-1])
        if parent is None:
            continue
        state = engine.step(parent, p[-1])
        if state[3] > 0:  # prefix does not fit; its extensions are skipped too
            continue
        states[p] = state
        enabled = engine.visible_enabled(state[0])
        allowed += prefix_count[p] * len(enabled)
        escaping += prefix_count[p] * len(enabled - followers[p])
    if allowed == 0:
        return 1.0
    return 1.0 - escaping / allowed


def simplicity(model: PetriNet | ProcessTree) -> float:
    """1 / (1 + max(mean arc degree - 2, 0)) over all places and transitions."""
    degrees = _net(model).node_degrees()
    mean_degree = sum(degrees) / len(degrees) if degrees else 0.0
    return 1.0 / (1.0 + max(mean_degree - SIMPLICITY_DEGREE_ALLOWANCE, 0.0))


def generalization(model: PetriNet | ProcessTree, log: EventLog, _replay: LogReplay | None = None) -> float:
    """1 - mean over transitions of 1/sqrt(times fired during replay); unfired count as 1."""
    net = _net(model)
    if not net.transitions:
        return 0.0
    occ = (_replay or replay(net, log)).transition_occurrences()
    inv = sum(1.0 / math.sqrt(o) if o > 0 else 1.0 for o in occ)
    return 1.0 - inv / len(net.transitions)


@dataclass(frozen=True)
class QualityReport:
    fitness: float
    precision: float
    simplicity: float
    generalization: float

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def evaluate(model: PetriNet | ProcessTree, log: EventLog) -> QualityReport:
    net = _net(model)
    rep = replay(net, log)
    return QualityReport(
        fitness=rep.fitness(),
        precision=precision(net, log),
        simplicity=simplicity(net),
        generalization=generalization(net, log, rep),
    )
