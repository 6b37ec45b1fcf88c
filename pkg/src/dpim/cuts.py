"""Inductive-Miner cuts on a directly-follows graph.

All cut functions return a :class:`CutResult` whose partition is the finest
one satisfying the cut's conditions. Sequence and loop partitions are
ordered (loop: body first); xor and parallel parts are sorted by their
smallest activity.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cmp_to_key
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .dfr import END, START, DfrTable


class CutKind(str, Enum):
    SEQ = "seq"
    XOR = "xor"
    AND = "and"
    LOOP = "loop"
    NONE = "none"


@dataclass(frozen=True)
class CutResult:
    kind: CutKind
    partition: tuple[frozenset[str], ...]

    def __post_init__(self):
        if self.kind is not CutKind.NONE and len(self.partition) < 2:
            raise ValueError("a cut needs at least two parts")
        seen = set()
        for part in self.partition:
            if not part:
                raise ValueError("cut parts must be nonempty")
            if seen & part:
                raise ValueError("cut parts must be disjoint")
            seen |= part

    def __bool__(self) -> bool:
        return self.kind is not CutKind.NONE

    def as_lists(self) -> list[list[str]]:
        return [sorted(p) for p in self.partition]


def _none(nodes) -> CutResult:
    return CutResult(CutKind.NONE, (frozenset(nodes),) if nodes else ())


@dataclass(frozen=True, eq=False)
class DfrGraph:
    """Directed graph over activities; START/END adjacency kept as attributes.

    ``weight`` optionally carries the edge counts; cuts only use it to
    choose among equally fine partitions.
    """

    nodes: tuple[str, ...]
    adj: np.ndarray
    starts: frozenset[str] = frozenset()
    ends: frozenset[str] = frozenset()
    weight: np.ndarray | None = None

    @classmethod
    def from_edges(cls, nodes: Iterable[str], edges: Iterable[tuple[str, str]],
                   starts=(), ends=()) -> "DfrGraph":
        nodes = tuple(sorted(nodes))
        idx = {a: i for i, a in enumerate(nodes)}
        adj = np.zeros((len(nodes), len(nodes)), dtype=bool)
        for a, b in edges:
            adj[idx[a], idx[b]] = True
        return cls(nodes, adj, frozenset(starts), frozenset(ends))

    @classmethod
    def from_table(cls, dfr: DfrTable, threshold: float = 0.0) -> "DfrGraph":
        """Edges are the table's pairs with count >= ``threshold``."""
        ok = dfr.present & (dfr.counts >= threshold)
        k = dfr.size
        starts = frozenset(dfr.alphabet[j] for j in np.flatnonzero(ok[k, :k]))
        ends = frozenset(dfr.alphabet[i] for i in np.flatnonzero(ok[:k, k]))
        weight = np.where(ok[:k, :k], dfr.counts[:k, :k], 0.0)
        return cls(dfr.alphabet, ok[:k, :k].copy(), starts, ends, weight)

    def edges(self) -> set[tuple[str, str]]:
        r, c = np.nonzero(self.adj)
        return {(self.nodes[i], self.nodes[j]) for i, j in zip(r.tolist(), c.tolist())}

    def to_dot(self) -> str:
        out = ["digraph dfg {"]
        for a in self.nodes:
            attrs = []
            if a in self.starts:
                attrs.append("start")
            if a in self.ends:
                attrs.append("end")
            out.append(f'  "{a}" [xlabel="{",".join(attrs)}"];')
        for a, b in sorted(self.edges()):
            out.append(f'  "{a}" -> "{b}";')
        out.append("}")
        return "\n".join(out) + "\n"


def _components(sym: np.ndarray) -> list[list[int]]:
    n = sym.shape[0]
    if n == 0:
        return []
    _, labels = connected_components(csr_matrix(sym), directed=False)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels.tolist()):
        groups.setdefault(lab, []).append(i)
    return sorted(groups.values(), key=min)


def _parts(g: DfrGraph, groups) -> tuple[frozenset[str], ...]:
    return tuple(frozenset(g.nodes[i] for i in grp) for grp in groups)


def _sorted_parts(parts) -> tuple[frozenset[str], ...]:
    return tuple(sorted(parts, key=min))


def transitive_closure(adj: np.ndarray) -> np.ndarray:
    reach = adj.copy()
    for k in range(reach.shape[0]):
        reach |= reach[:, k:k + 1] & reach[k:k + 1, :]
    return reach


def xor_cut(g: DfrGraph) -> CutResult:
    comps = _components(g.adj | g.adj.T)
    if len(comps) < 2:
        return _none(g.nodes)
    return CutResult(CutKind.XOR, _parts(g, comps))


def seq_cut(g: DfrGraph) -> CutResult:
    n = len(g.nodes)
    if n < 2:
        return _none(g.nodes)
    reach = transitive_closure(g.adj)
    # nodes that reach each other, or neither reaches the other, share a block
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if reach[i, j] == reach[j, i]:
                parent[find(i)] = find(j)
    while True:
        blocks: dict[int, list[int]] = {}
        for i in range(n):
            blocks.setdefault(find(i), []).append(i)
        groups = list(blocks.values())
        merged = False
        for x in range(len(groups)):
            for y in range(x + 1, len(groups)):
                sub = reach[np.ix_(groups[x], groups[y])]
                if not (sub.all() or (~sub).all()):
                    parent[find(groups[x][0])] = find(groups[y][0])
                    merged = True
                    break
            if merged:
                break
        if not merged:
            break
    if len(groups) < 2:
        return _none(g.nodes)
    # a block precedes every block it reaches
    groups.sort(key=cmp_to_key(lambda x, y: -1 if reach[x[0], y[0]] else 1))
    return CutResult(CutKind.SEQ, _parts(g, groups))


def and_cut(g: DfrGraph, starts: Iterable[str], ends: Iterable[str]) -> CutResult:
    """Parallel cut: all cross-part pairs connected both ways, each part
    holding a start and an end activity.

    The finest bidirectional partition comes from components of the
    "not connected both ways" graph. Parts lacking a start or an end are
    then paired (start-only with end-only); anything left over joins the
    part it is most strongly connected to (edge weights, else edge count;
    ties go to the part with the smallest activity).
    """
    starts, ends = set(starts), set(ends)
    n = len(g.nodes)
    if n < 2:
        return _none(g.nodes)
    both = g.adj & g.adj.T
    lacking = ~both
    np.fill_diagonal(lacking, False)
    comps = [frozenset(g.nodes[i] for i in grp) for grp in _components(lacking)]
    full, s_only, e_only, neither = [], [], [], []
    for c in comps:
        has_s, has_e = bool(c & starts), bool(c & ends)
        (full if has_s and has_e else s_only if has_s else e_only if has_e else neither).append(c)
    groups = list(full)
    for s, e in zip(s_only, e_only):
        groups.append(s | e)
    leftover = s_only[len(e_only):] + e_only[len(s_only):] + neither
    if not groups:
        return _none(g.nodes)
    groups = list(_sorted_parts(groups))
    w = g.weight if g.weight is not None else g.adj.astype(float)
    w = w + w.T
    idx = {a: i for i, a in enumerate(g.nodes)}
    for c in leftover:
        ci = [idx[a] for a in c]
        scores = [w[np.ix_(ci, [idx[a] for a in grp])].sum() for grp in groups]
        best = int(np.argmax(scores))
        groups[best] = groups[best] | c
    groups = _sorted_parts(groups)
    if len(groups) < 2:
        return _none(g.nodes)
    return CutResult(CutKind.AND, groups)


def _loop_violation(g: DfrGraph, comp: set[int], body: set[int], starts: set[int], ends: set[int]) -> bool:
    adj = g.adj
    s_idx = sorted(starts)
    e_idx = sorted(ends)
    for a in comp:
        for b in body:
            # redo may only re-enter the body at start activities
            if adj[a, b] and b not in starts:
                return True
            # the body may only leave for the redo from end activities
            if adj[b, a] and b not in ends:
                return True
        to_starts = adj[a, s_idx]
        if to_starts.any() and not to_starts.all():
            return True
        from_ends = adj[e_idx, a]
        if from_ends.any() and not from_ends.all():
            return True
    return False


def loop_cut(g: DfrGraph, starts: Iterable[str], ends: Iterable[str]) -> tuple[CutResult, DfrGraph]:
    """Loop cut with the body first; also returns the graph minus body/redo edges."""
    idx = {a: i for i, a in enumerate(g.nodes)}
    s = {idx[a] for a in starts if a in idx}
    e = {idx[a] for a in ends if a in idx}
    if not s or not e:
        return _none(g.nodes), g
    body = s | e
    rest = [i for i in range(len(g.nodes)) if i not in body]
    sub = g.adj[np.ix_(rest, rest)]
    comps = [{rest[i] for i in grp} for grp in _components(sub | sub.T)]
    changed = True
    while changed:
        changed = False
        for c in comps:
            if _loop_violation(g, c, body, s, e):
                body |= c
                comps.remove(c)
                changed = True
                break
    if not comps:
        return _none(g.nodes), g
    parts = (frozenset(g.nodes[i] for i in body),) + _sorted_parts(
        frozenset(g.nodes[i] for i in c) for c in comps)
    part_of = np.empty(len(g.nodes), dtype=np.int64)
    for k, p in enumerate(parts):
        for a in p:
            part_of[idx[a]] = k
    same = part_of[:, None] == part_of[None, :]
    pruned = DfrGraph(g.nodes, g.adj & same, g.starts, g.ends,
                      None if g.weight is None else np.where(same, g.weight, 0.0))
    return CutResult(CutKind.LOOP, parts), pruned


def remove_heavy_loops(dfr: DfrTable, dp_esize: float, std: float) -> DfrTable:
    """Drop both directions of every pair whose summed counts reach ``dp_esize + std``.

    Such pairs behave like short loops rather than interleavings; removing
    them keeps them from blocking a parallel cut.
    """
    if std < 0:
        raise ValueError("std must be non-negative")
    k = dfr.size
    counts = dfr.counts[:k, :k]
    present = dfr.present[:k, :k]
    both = present & present.T
    heavy = both & (counts + counts.T >= dp_esize + std)
    np.fill_diagonal(heavy, False)
    keep = dfr.present.copy()
    keep[:k, :k] &= ~heavy
    return DfrTable(dfr.alphabet, dfr.counts.copy(), keep, dfr.kind)


def detect_cut(g: DfrGraph, starts, ends, and_graph: DfrGraph | None = None) -> tuple[CutResult, DfrGraph]:
    """First matching cut in the order sequence, xor, parallel, loop."""
    for fn in (seq_cut, xor_cut):
        cut = fn(g)
        if cut:
            return cut, g
    cut = and_cut(and_graph if and_graph is not None else g, starts, ends)
    if cut:
        return cut, and_graph if and_graph is not None else g
    cut, pruned = loop_cut(g, starts, ends)
    return cut, pruned


__all__ = ["CutKind", "CutResult", "DfrGraph", "START", "END", "and_cut", "detect_cut", "loop_cut",
           "remove_heavy_loops", "seq_cut", "transitive_closure", "xor_cut"]
