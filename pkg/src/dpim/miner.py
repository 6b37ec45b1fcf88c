"""Differentially private Inductive Miner and the non-private baseline.

``mine_dp`` wraps one tree-building trial in the rejection sampler:

1. pick ``n`` uniformly from ``[lb, ub]``;
2. select ``n`` directly-follows pairs by repeated Report Noisy Max and
   release each selected count with fresh Laplace noise;
3. build a tree from the noisy pairs (cut cascade, recursive);
4. score it with noisy replay fitness; accept if the score reaches ``t``.

The raw log is only read through :class:`SensitiveLog`: once for the
directly-follows counts, for the start/end counts below parallel and
loop cuts, and for the fitness score.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import dp_mech
from .conformance import replay_fitness
from .cuts import CutKind, DfrGraph, and_cut, loop_cut, remove_heavy_loops, seq_cut, xor_cut
from .dfr import END, NOISY, START, DfrTable, build_dfr, predecessors, restrict, successors
from .dp_mech import BudgetLedger, RandomSource
from .event_log import EventLog
from .process_tree import (HOLE, TAU, Operator, ProcessTree, TreeCursor, flower, leaf, loop,
                           normalize, template, xor)

logger = logging.getLogger(__name__)

# what "considerably fewer traces" is measured against when placing tau:
# the size of the subtree being built, or the whole log at every depth
SIZE_REFERENCES = ("node", "log")

# true counts are whole traces; gaps below half a trace are noise at any eps
COUNT_RESOLUTION = 0.5

_OP = {CutKind.SEQ: Operator.SEQ, CutKind.XOR: Operator.XOR,
       CutKind.AND: Operator.AND, CutKind.LOOP: Operator.LOOP}


class SensitiveLog:
    """The only gateway from the miner to raw traces."""

    def __init__(self, log: EventLog):
        self._log = log

    def __len__(self) -> int:
        # the number of traces is treated as public
        return len(self._log)

    @property
    def activities(self) -> tuple[str, ...]:
        return self._log.activities

    def directly_follows(self) -> DfrTable:
        return build_dfr(self._log)

    def boundary_counts(self, acts) -> tuple[dict[str, int], dict[str, int]]:
        """First/last-activity counts of the traces projected onto ``acts``.

        Traces whose projection is empty contribute nothing.
        """
        acts = set(acts)
        c_start = {a: 0 for a in acts}
        c_end = {a: 0 for a in acts}
        for trace, w in self._log.variants().items():
            proj = [a for a in trace if a in acts]
            if proj:
                c_start[proj[0]] += w
                c_end[proj[-1]] += w
        return c_start, c_end

    def fitness(self, tree: ProcessTree) -> float:
        return replay_fitness(tree, self._log)


@dataclass
class DpimConfig:
    eps: float
    eps0: float = 0.01
    shares: tuple[float, float, float] = (0.65, 0.25, 0.1)
    t: float = 0.95
    gamma: float = 0.01
    lb: int | None = None
    ub: int | None = None
    steps: int | None = None
    edge_threshold: float = 0.5
    size_reference: str = "node"

    @property
    def eps1(self) -> float:
        return 0.5 * (self.eps - self.eps0)

    @property
    def rounds(self) -> int:
        return self.steps if self.steps is not None else dp_mech.rejection_steps(self.gamma, self.eps0)

    def validate(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if not 0 < self.eps0 <= 1:
            raise ValueError(f"eps0 must lie in (0, 1], got {self.eps0}")
        if not self.eps1 > 0:
            raise ValueError(f"eps must exceed eps0 (eps={self.eps}, eps0={self.eps0})")
        if len(self.shares) != 3 or any(not r > 0 for r in self.shares):
            raise ValueError(f"shares must be three positive numbers, got {self.shares}")
        if abs(sum(self.shares) - 1.0) > 1e-9:
            raise ValueError(f"shares must sum to 1, got {sum(self.shares)}")
        if not 0 <= self.t <= 1:
            raise ValueError(f"threshold t must lie in [0, 1], got {self.t}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.lb is None or self.ub is None:
            raise ValueError("lb and ub are required")
        if not 1 <= self.lb <= self.ub:
            raise ValueError(f"need 1 <= lb <= ub, got lb={self.lb}, ub={self.ub}")
        if self.size_reference not in SIZE_REFERENCES:
            raise ValueError(f"size_reference must be one of {SIZE_REFERENCES}, got {self.size_reference!r}")
        if self.steps is not None and self.steps < dp_mech.rejection_steps(self.gamma, self.eps0):
            raise ValueError(f"steps={self.steps} is below the minimum "
                             f"{dp_mech.rejection_steps(self.gamma, self.eps0)}")

    def as_dict(self) -> dict:
        return {"eps": self.eps, "eps0": self.eps0, "shares": list(self.shares), "t": self.t,
                "gamma": self.gamma, "lb": self.lb, "ub": self.ub, "steps": self.rounds,
                "edge_threshold": self.edge_threshold, "size_reference": self.size_reference}


def auto_bounds_unsafe(log: EventLog) -> tuple[int, int]:
    """Heuristic ``(lb, ub)`` from the raw relation. NOT differentially private.

    Counts pairs occurring in at least one trace, subtracts/adds 15, rounds
    up to a multiple of 5 and clamps to ``[|A|, |A|^2]``.
    """
    raw = build_dfr(log)
    nonzero = int((raw.counts > 0).sum())
    k = raw.size

    def up5(x):
        return 5 * math.ceil(x / 5)

    lb = max(up5(nonzero - 15), k, 1)
    ub = min(up5(nonzero + 15), k * k, (k + 1) ** 2)
    ub = max(ub, min(lb, (k + 1) ** 2))
    lb = min(lb, ub)
    return lb, ub


# selection

def select_top_n(dfr: DfrTable, n: int, eps_r1: float, rng: RandomSource,
                 ledger: BudgetLedger | None = None) -> DfrTable:
    """``n`` rounds of Report Noisy Max without replacement, each selected
    count released with fresh Laplace noise.

    Every round spends ``eps_r1 / (2n)`` on the selection and as much on the
    release, ``eps_r1`` in total.
    """
    domain = np.flatnonzero(dfr.present.ravel())
    if not 1 <= n <= domain.size:
        raise ValueError(f"n={n} must lie in [1, {domain.size}]")
    flat = dfr.counts.ravel()
    scale = 2.0 * n / eps_r1
    remaining = list(domain.tolist())
    counts = np.zeros(dfr.counts.shape, dtype=float)
    present = np.zeros_like(dfr.present)
    for i in range(n):
        queries = [(cell, flat[cell]) for cell in remaining]
        cell = dp_mech.report_noisy_max(rng, queries, eps_r1 / (2.0 * n))
        remaining.remove(cell)
        counts.flat[cell] = flat[cell] + dp_mech.laplace_noise(rng, scale)
        present.flat[cell] = True
        if ledger is not None:
            ledger.spend(f"select.renom[{i}]", eps_r1 / (2.0 * n))
            ledger.spend(f"select.release[{i}]", eps_r1 / (2.0 * n))
    return DfrTable(dfr.alphabet, counts, present, NOISY)


# tree construction

@dataclass
class MiningContext:
    dp_dfr: DfrTable
    std: float
    log: SensitiveLog
    rng: RandomSource
    eps_start_end: float
    ledger: BudgetLedger | None = None
    edge_threshold: float = 0.0
    size_reference: str = "node"
    dp_esize: float = 0.0
    dp_actc: dict[str, float] = field(default_factory=dict)
    dp_s: frozenset[str] = frozenset()
    dp_e: frozenset[str] = frozenset()
    start_end_spent: float = 0.0
    depth: int = 0
    loop_depth: int = 0

    def initialise(self):
        """Start/end sets, log size and per-activity counts from the noisy pairs."""
        t = self.dp_dfr
        k = t.size
        ok = t.present & (t.counts >= self.edge_threshold)
        self.dp_s = frozenset(t.alphabet[j] for j in np.flatnonzero(ok[k, :k]))
        self.dp_e = frozenset(t.alphabet[i] for i in np.flatnonzero(ok[:k, k]))
        self.dp_esize = float(t.counts[k][ok[k]].sum())
        # pairs leaving an activity, END included, so a closing activity is not undercounted
        rows = np.where(ok[:k], t.counts[:k], 0.0)
        self.dp_actc = {a: float(rows[i].sum()) for i, a in enumerate(t.alphabet)}

    def edge(self, table: DfrTable, a: str, b: str) -> bool:
        v = table.get(a, b)
        return v is not None and v >= self.edge_threshold

    @property
    def margin(self) -> float:
        """How far below a size a count must lie to be considerably smaller."""
        return max(self.std, COUNT_RESOLUTION)

    def part_size(self, part, size: float) -> float:
        """Noisy number of traces passing through one branch of a choice."""
        if self.size_reference == "log":
            return self.dp_esize
        return min(size, max((self.dp_actc.get(a, 0.0) for a in part), default=0.0))


def build_tree(ctx: MiningContext, table: DfrTable | None = None,
               dp_s=None, dp_e=None, size: float | None = None) -> ProcessTree:
    """Cut cascade on the (restricted) noisy relation; flower if nothing fits.

    ``size`` is the noisy number of traces entering this subtree; the root
    uses the log size.
    """
    if table is None:
        table = ctx.dp_dfr
        ctx.initialise()
        dp_s, dp_e = ctx.dp_s, ctx.dp_e
    if size is None:
        size = ctx.dp_esize
    acts = table.alphabet
    if len(acts) == 0:
        return TAU
    if len(acts) == 1:
        return _singleton(ctx, table, acts[0], size)
    ctx.depth += 1
    if ctx.depth > len(ctx.dp_dfr.alphabet) + 1:
        raise RuntimeError("recursion did not shrink the activity set")
    try:
        graph = DfrGraph.from_table(table, ctx.edge_threshold)
        starts = set(dp_s) & set(acts)
        ends = set(dp_e) & set(acts)
        for fn in (seq_cut, xor_cut):
            cut = fn(graph)
            if cut:
                return append_tree(ctx, cut.kind, cut.partition, table, dp_s, dp_e, size)
        if ctx.size_reference == "node" and ctx.loop_depth:
            # below a loop, per-trace counts of both orders can legitimately
            # exceed the size, so they say nothing about short loops
            no_loops = table
        else:
            no_loops = remove_heavy_loops(table, size, ctx.margin)
        cut = and_cut(DfrGraph.from_table(no_loops, ctx.edge_threshold), starts, ends)
        if cut:
            return append_tree(ctx, cut.kind, cut.partition, no_loops, dp_s, dp_e, size)
        cut, _ = loop_cut(graph, starts, ends)
        if cut:
            return append_tree(ctx, cut.kind, cut.partition, table, dp_s, dp_e, size)
        return flower(acts)
    finally:
        ctx.depth -= 1


def _singleton(ctx: MiningContext, table: DfrTable, a: str, size: float) -> ProcessTree:
    if ctx.edge(table, a, a):
        return loop(leaf(a), TAU)
    if ctx.dp_actc.get(a, 0.0) <= size - ctx.margin:
        return xor(TAU, leaf(a))
    return leaf(a)


def append_tree(ctx: MiningContext, kind: CutKind, partition, table: DfrTable,
                dp_s, dp_e, size: float | None = None) -> ProcessTree:
    """Graft the cut's operator and one child per part, left to right.

    Branches of a choice and redo parts of a loop are sized by their own
    activity counts; other parts inherit ``size``.
    """
    op = _OP[kind]
    size = ctx.dp_esize if size is None else size
    dp_s, dp_e = detect_start_end(ctx, kind, partition, table, dp_s, dp_e)
    sizes = [size] * len(partition)
    if kind is CutKind.XOR:
        sizes = [ctx.part_size(p, size) for p in partition]
    elif kind is CutKind.LOOP:
        sizes = [ctx.part_size(p, size) for p in partition]
    if kind is CutKind.XOR and ctx.size_reference == "node":
        covered = sum(sizes)
    else:
        covered = sum(ctx.dp_actc.get(a, 0.0) for part in partition for a in part)
    extra_tau = covered <= size - ctx.margin
    # loops are optional unless the body is known to run in (almost) every case
    optional_loop = ctx.size_reference == "log" or sizes[0] <= size - ctx.margin

    cursor = TreeCursor()
    if op is Operator.LOOP and optional_loop:
        cursor.graft(xor(TAU, HOLE))
    cursor.graft(template(op, len(partition) + int(extra_tau)))
    for part, part_size in zip(partition, sizes):
        part = sorted(part)
        if len(part) == 1:
            cursor.graft(_singleton(ctx, table, part[0], part_size))
        elif not part:
            cursor.graft(TAU)
        else:
            ctx.loop_depth += kind is CutKind.LOOP
            try:
                cursor.graft(build_tree(ctx, restrict(table, part), dp_s, dp_e, part_size))
            finally:
                ctx.loop_depth -= kind is CutKind.LOOP
    if extra_tau:
        cursor.graft(TAU)
    return cursor.finish()


def _boundary(ctx: MiningContext, partition, table: DfrTable, dp_s, dp_e):
    """Starts/ends of each part read off the noisy relation.

    A part's start activities are those it is entered through: inherited
    starts plus activities with an edge from another part. Ends mirror
    this. Singletons also pass their successors/predecessors on, so the
    next part inherits them.
    """
    s, e = set(), set()
    acts = set(table.alphabet)
    for part in partition:
        outside = acts - set(part)
        for a in part:
            if a in dp_s or any(ctx.edge(table, b, a) for b in outside):
                s.add(a)
            if a in dp_e or any(ctx.edge(table, a, b) for b in outside):
                e.add(a)
        if len(part) == 1:
            (a,) = part
            if a in dp_s:
                s |= successors(table, a, ctx.edge_threshold)
            if a in dp_e:
                e |= predecessors(table, a, ctx.edge_threshold)
    return s, e


def detect_start_end(ctx: MiningContext, kind: CutKind, partition, table: DfrTable, dp_s, dp_e):
    """Start/end activities for the children of a cut.

    Below sequence and xor cuts this is post-processing of the noisy
    relation. Below parallel and loop cuts the log projected onto the cut
    is counted with Laplace noise, spending half of the remaining
    start/end budget; loop parts additionally get the activities through
    which they are entered and left.
    """
    if kind in (CutKind.SEQ, CutKind.XOR):
        s, e = _boundary(ctx, partition, table, dp_s, dp_e)
        return frozenset(s), frozenset(e)

    eps = 0.5 * ctx.eps_start_end
    ctx.eps_start_end -= eps
    ctx.start_end_spent += eps
    if ctx.ledger is not None:
        ctx.ledger.spend(f"start_end[{kind.value}]", eps)
    acts = sorted(a for part in partition for a in part)
    c_start, c_end = ctx.log.boundary_counts(acts)
    scale = 4.0 / eps
    bar = dp_mech.significance_bar(scale)
    noise = dp_mech.laplace_noise(ctx.rng, scale, 2 * len(acts))
    s = {a for i, a in enumerate(acts) if c_start[a] + noise[i] >= bar}
    e = {a for i, a in enumerate(acts) if c_end[a] + noise[len(acts) + i] >= bar}
    # nothing significant: fall back to every activity of the cut (data independent)
    s, e = s or set(acts), e or set(acts)
    if kind is CutKind.LOOP:
        bs, be = _boundary(ctx, partition, table, s, e)
        s, e = s | bs, e | be
    return frozenset(s), frozenset(e)


# the full mechanism

@dataclass
class MiningOutcome:
    tree: ProcessTree | None
    noisy_fitness: float | None
    ledger: BudgetLedger
    trials: list[dict] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.tree is not None

    def as_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "tree": None if self.tree is None else str(self.tree),
            "noisy_fitness": self.noisy_fitness,
            "rounds": len(self.trials),
        }


def run_trial(sensitive: SensitiveLog, raw: DfrTable, cfg: DpimConfig, rng: RandomSource):
    """One candidate: ``(tree, noisy_fitness, trial_record)``."""
    eps1 = cfg.eps1
    r1, r2, r3 = cfg.shares
    ledger = BudgetLedger(eps1)
    n = rng.integers(cfg.lb, cfg.ub)
    dp_dfr = select_top_n(raw, n, eps1 * r1, rng, ledger)
    ctx = MiningContext(
        dp_dfr=dp_dfr,
        std=dp_mech.significance_bar(2.0 * n / (eps1 * r1)),
        log=sensitive,
        rng=rng,
        eps_start_end=eps1 * r2,
        ledger=ledger,
        edge_threshold=cfg.edge_threshold,
        size_reference=cfg.size_reference,
    )
    tree = normalize(build_tree(ctx))
    noisy_fit = sensitive.fitness(tree) + dp_mech.laplace_noise(rng, 1.0 / (len(sensitive) * eps1 * r3))
    ledger.spend("fitness", eps1 * r3)
    record = {"n": n, "noisy_fitness": noisy_fit, "start_end_spent": ctx.start_end_spent,
              "ledger": ledger}
    return tree, noisy_fit, record


def mine_dp(log: EventLog | SensitiveLog, cfg: DpimConfig, rng: RandomSource | None = None) -> MiningOutcome:
    """Rejection-sampled private mining; the run costs exactly ``cfg.eps``."""
    cfg.validate()
    rng = rng or RandomSource()
    sensitive = log if isinstance(log, SensitiveLog) else SensitiveLog(log)
    if len(sensitive) == 0:
        raise ValueError("cannot mine an empty log")
    raw = sensitive.directly_follows()
    if cfg.ub > len(raw):
        raise ValueError(f"ub={cfg.ub} exceeds the {len(raw)} available pairs")

    eps1 = cfg.eps1
    r1, r2, r3 = cfg.shares
    ledger = BudgetLedger(cfg.eps)
    ledger.spend("trial.select", r1 * eps1)
    ledger.spend("trial.start_end", r2 * eps1)
    ledger.spend("trial.fitness", r3 * eps1)
    ledger.spend("rejection.repetition", eps1)
    ledger.spend("rejection.eps0", cfg.eps0)

    trials: list[dict] = []

    def trial():
        tree, score, record = run_trial(sensitive, raw, cfg, rng)
        trials.append(record)
        return tree, score

    result = dp_mech.rejection_sample(rng, trial, cfg.t, cfg.gamma, cfg.eps0, cfg.rounds)
    if result is dp_mech.BOTTOM:
        logger.info("rejected after %d rounds", len(trials))
        return MiningOutcome(None, None, ledger, trials)
    tree, score = result
    return MiningOutcome(tree, score, ledger, trials)


# non-private baseline

def mine_baseline(log: EventLog) -> ProcessTree:
    """Inductive Miner with exact sub-logs: same cut order, no noise."""
    if len(log) == 0:
        raise ValueError("cannot mine an empty log")
    return normalize(_im(Counter(log.traces)))


def _im(traces: Counter) -> ProcessTree:
    empties = traces.get((), 0)
    nonempty = Counter({t: c for t, c in traces.items() if t})
    if not nonempty:
        return TAU
    if empties:
        return xor(TAU, _im(nonempty))
    acts = sorted({a for t in nonempty for a in t})
    if len(acts) == 1:
        if all(len(t) == 1 for t in nonempty):
            return leaf(acts[0])
        return loop(leaf(acts[0]), TAU)

    sub = EventLog.from_variants(nonempty)
    table = build_dfr(sub)
    graph = DfrGraph.from_table(table, 0.5)
    starts, ends = graph.starts, graph.ends
    cut = seq_cut(graph)
    if not cut:
        cut = xor_cut(graph)
    if not cut:
        # exact counts: a pair is loop-like once both directions exceed the log size
        no_loops = remove_heavy_loops(table, float(len(sub)), 0.5)
        cut = and_cut(DfrGraph.from_table(no_loops, 0.5), starts, ends)
    if not cut:
        cut, _ = loop_cut(graph, starts, ends)
    if not cut:
        return flower(acts)
    parts = [set(p) for p in cut.partition]
    sublogs = _split(cut.kind, parts, nonempty)
    return ProcessTree(operator=_OP[cut.kind], children=tuple(_im(s) for s in sublogs))


def _split(kind: CutKind, parts: list[set], traces: Counter) -> list[Counter]:
    out = [Counter() for _ in parts]
    if kind is CutKind.XOR:
        for t, c in traces.items():
            i = next(i for i, p in enumerate(parts) if t[0] in p)
            out[i][tuple(a for a in t if a in parts[i])] += c
    elif kind in (CutKind.SEQ, CutKind.AND):
        for t, c in traces.items():
            for i, p in enumerate(parts):
                out[i][tuple(a for a in t if a in p)] += c
    else:
        where = {a: i for i, p in enumerate(parts) for a in p}
        for t, c in traces.items():
            run, cur = [], where[t[0]]
            for a in t:
                if where[a] != cur:
                    out[cur][tuple(run)] += c
                    run, cur = [], where[a]
                run.append(a)
            out[cur][tuple(run)] += c
    return out


__all__ = ["DpimConfig", "MiningContext", "MiningOutcome", "SensitiveLog", "append_tree",
           "auto_bounds_unsafe", "build_tree", "detect_start_end", "mine_baseline", "mine_dp",
           "run_trial", "select_top_n", "START", "END"]
