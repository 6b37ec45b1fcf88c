"""Workflow nets translated from process trees."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .process_tree import Operator, ProcessTree


@dataclass(frozen=True)
class Transition:
    name: str
    label: str | None  # None for silent transitions

    @property
    def silent(self) -> bool:
        return self.label is None


@dataclass
class PetriNet:
    places: list[str] = field(default_factory=list)
    transitions: list[Transition] = field(default_factory=list)
    arcs: list[tuple[str, str]] = field(default_factory=list)
    source: str = "source"
    sink: str = "sink"

    @property
    def initial_marking(self) -> dict[str, int]:
        return {self.source: 1}

    @property
    def final_marking(self) -> dict[str, int]:
        return {self.sink: 1}

    def add_place(self, name=None) -> str:
        name = name or f"p{len(self.places)}"
        self.places.append(name)
        return name

    def add_transition(self, label) -> str:
        name = f"t{len(self.transitions)}"
        self.transitions.append(Transition(name, label))
        return name

    def arc(self, a: str, b: str):
        self.arcs.append((a, b))

    def incidence(self, activities=None):
        """Dense ``pre``/``post`` matrices (transitions x places) and label codes.

        ``activities`` fixes the label coding; silent transitions get -1 and
        labels missing from ``activities`` get -2.
        """
        pidx = {p: i for i, p in enumerate(self.places)}
        tidx = {t.name: i for i, t in enumerate(self.transitions)}
        pre = np.zeros((len(self.transitions), len(self.places)), dtype=np.int64)
        post = np.zeros_like(pre)
        for a, b in self.arcs:
            if a in tidx:
                post[tidx[a], pidx[b]] += 1
            else:
                pre[tidx[b], pidx[a]] += 1
        if activities is None:
            activities = sorted({t.label for t in self.transitions if t.label is not None})
        code = {a: i for i, a in enumerate(activities)}
        tlabel = np.array([-1 if t.label is None else code.get(t.label, -2) for t in self.transitions],
                          dtype=np.int64)
        return pre, post, tlabel, pidx[self.source], pidx[self.sink]

    def node_degrees(self) -> list[int]:
        deg = {n: 0 for n in self.places}
        deg.update({t.name: 0 for t in self.transitions})
        for a, b in self.arcs:
            deg[a] += 1
            deg[b] += 1
        return list(deg.values())

    def to_pnml(self) -> str:
        out = ['<?xml version="1.0" encoding="UTF-8"?>', "<pnml>",
               '  <net id="net" type="http://www.pnml.org/version-2009/grammar/ptnet">',
               '    <page id="page">']
        for p in self.places:
            out.append(f'      <place id="{escape(p)}"><name><text>{escape(p)}</text></name>')
            if p == self.source:
                out.append("        <initialMarking><text>1</text></initialMarking>")
            out.append("      </place>")
        for t in self.transitions:
            out.append(f'      <transition id="{t.name}">')
            out.append(f"        <name><text>{escape(t.label or t.name)}</text></name>")
            if t.silent:
                out.append('        <toolspecific tool="dpim" version="1" silent="true"/>')
            out.append("      </transition>")
        for i, (a, b) in enumerate(self.arcs):
            out.append(f'      <arc id="a{i}" source="{escape(a)}" target="{escape(b)}"/>')
        out += ["    </page>", "    <finalmarkings>", "      <marking>",
                f'        <place idref="{escape(self.sink)}"><text>1</text></place>',
                "      </marking>", "    </finalmarkings>", "  </net>", "</pnml>"]
        return "\n".join(out) + "\n"

    def to_dot(self) -> str:
        out = ["digraph net {", "  rankdir=LR;"]
        for p in self.places:
            out.append(f'  "{p}" [shape=circle, label=""];')
        for t in self.transitions:
            if t.silent:
                out.append(f'  "{t.name}" [shape=box, style=filled, fillcolor=black, label="", width=0.15];')
            else:
                out.append(f'  "{t.name}" [shape=box, label="{t.label}"];')
        for a, b in self.arcs:
            out.append(f'  "{a}" -> "{b}";')
        out.append("}")
        return "\n".join(out) + "\n"


def to_petri_net(tree: ProcessTree) -> PetriNet:
    """Block-structured translation; every operator gets its own sub-net.

    LOOP children run between private places entered and left through
    silent transitions, so redo parts never hand control back to places
    shared with XOR siblings.
    """
    if not tree.is_finished():
        raise ValueError("cannot translate a tree with empty leaves")
    net = PetriNet()
    net.add_place("source")
    net.add_place("sink")
    _translate(net, tree, "source", "sink")
    return net


def _translate(net: PetriNet, t: ProcessTree, entry: str, exit_: str):
    if t.operator is None:
        tr = net.add_transition(t.label)
        net.arc(entry, tr)
        net.arc(tr, exit_)
    elif t.operator is Operator.SEQ:
        places = [entry] + [net.add_place() for _ in t.children[:-1]] + [exit_]
        for i, c in enumerate(t.children):
            _translate(net, c, places[i], places[i + 1])
    elif t.operator is Operator.XOR:
        for c in t.children:
            _translate(net, c, entry, exit_)
    elif t.operator is Operator.AND:
        split = net.add_transition(None)
        join = net.add_transition(None)
        net.arc(entry, split)
        net.arc(join, exit_)
        for c in t.children:
            pi, po = net.add_place(), net.add_place()
            net.arc(split, pi)
            net.arc(po, join)
            _translate(net, c, pi, po)
    elif t.operator is Operator.LOOP:
        li, lo = net.add_place(), net.add_place()
        enter = net.add_transition(None)
        leave = net.add_transition(None)
        net.arc(entry, enter)
        net.arc(enter, li)
        net.arc(lo, leave)
        net.arc(leave, exit_)
        _translate(net, t.children[0], li, lo)
        for c in t.children[1:]:
            _translate(net, c, lo, li)
    else:  # pragma: no cover
        raise ValueError(f"unknown operator {t.operator}")


def reachability_graph(net: PetriNet, limit: int = 10_000):
    """Reachable markings and edges ``(from, transition, to)``; ``None`` past ``limit``."""
    pre, post, _, source, _ = net.incidence()
    m0 = tuple(1 if i == source else 0 for i in range(len(net.places)))
    index = {m0: 0}
    order = [m0]
    edges = []
    queue = deque([m0])
    while queue:
        m = queue.popleft()
        arr = np.array(m)
        for t in range(pre.shape[0]):
            if np.all(arr >= pre[t]):
                nxt = tuple((arr - pre[t] + post[t]).tolist())
                if nxt not in index:
                    if len(order) >= limit:
                        return None
                    index[nxt] = len(order)
                    order.append(nxt)
                    queue.append(nxt)
                edges.append((index[m], t, index[nxt]))
    return order, edges


def is_sound(net: PetriNet, limit: int = 10_000) -> bool:
    """Classical workflow-net soundness by explicit state-space exploration."""
    graph = reachability_graph(net, limit)
    if graph is None:
        return False
    markings, edges = graph
    sink = net.places.index(net.sink)
    final = tuple(1 if i == sink else 0 for i in range(len(net.places)))
    if final not in markings:
        return False
    f = markings.index(final)
    # proper completion
    for m in markings:
        if m[sink] > 0 and m != final:
            return False
    # option to complete: final reachable from every marking
    back = [[] for _ in markings]
    for a, _, b in edges:
        back[b].append(a)
    ok = {f}
    stack = [f]
    while stack:
        x = stack.pop()
        for y in back[x]:
            if y not in ok:
                ok.add(y)
                stack.append(y)
    if len(ok) != len(markings):
        return False
    # no dead transitions
    return {t for _, t, _ in edges} == set(range(len(net.transitions)))
