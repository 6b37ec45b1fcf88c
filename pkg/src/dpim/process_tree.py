"""Process trees: model, left-to-right construction, text and JSON forms."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator


class Operator(str, Enum):
    SEQ = "->"
    XOR = "X"
    AND = "+"
    LOOP = "*"


@dataclass(frozen=True)
class ProcessTree:
    """A node. ``operator`` set: inner node; else ``label`` set: activity leaf;
    else silent leaf (tau). ``hole`` marks the empty leaf used during construction."""

    operator: Operator | None = None
    label: str | None = None
    children: tuple["ProcessTree", ...] = ()
    hole: bool = False

    def __post_init__(self):
        if self.operator is not None:
            if self.label is not None or self.hole:
                raise ValueError("operator nodes carry neither label nor hole flag")
            if len(self.children) < 2:
                raise ValueError(f"{self.operator.name} needs at least 2 children, got {len(self.children)}")
        elif self.children:
            raise ValueError("leaves have no children")

    @property
    def is_leaf(self) -> bool:
        return self.operator is None

    @property
    def is_tau(self) -> bool:
        return self.operator is None and self.label is None and not self.hole

    def walk(self) -> Iterator["ProcessTree"]:
        yield self
        for c in self.children:
            yield from c.walk()

    def activities(self) -> set[str]:
        return {n.label for n in self.walk() if n.label is not None}

    def is_finished(self) -> bool:
        return not any(n.hole for n in self.walk())

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)

    def __str__(self) -> str:
        return serialize(self)


TAU = ProcessTree()
HOLE = ProcessTree(hole=True)


def leaf(label: str) -> ProcessTree:
    return ProcessTree(label=label)


def node(op: Operator, *children: ProcessTree) -> ProcessTree:
    return ProcessTree(operator=op, children=tuple(children))


def seq(*c):
    return node(Operator.SEQ, *c)


def xor(*c):
    return node(Operator.XOR, *c)


def par(*c):
    return node(Operator.AND, *c)


def loop(*c):
    return node(Operator.LOOP, *c)


def _as_tree(x) -> ProcessTree:
    if isinstance(x, ProcessTree):
        return x
    if x is None or x == "tau":
        return TAU
    return leaf(x)


def flower(acts: Iterable[str]) -> ProcessTree:
    """LOOP(tau, a1, ..., ak): any sequence over ``acts``, including the empty one."""
    acts = sorted(set(acts))
    if not acts:
        raise ValueError("flower model needs at least one activity")
    return loop(TAU, *(leaf(a) for a in acts))


class TreeCursor:
    """Builds a tree by filling empty leaves from left to right."""

    def __init__(self):
        self.tree = HOLE

    def has_hole(self) -> bool:
        return not self.tree.is_finished()

    def graft(self, fragment) -> "TreeCursor":
        """Replace the leftmost empty leaf with ``fragment`` (which may contain holes)."""
        fragment = _as_tree(fragment)
        tree, done = _replace_first_hole(self.tree, fragment)
        if not done:
            raise ValueError("tree has no empty leaf left")
        self.tree = tree
        return self

    def finish(self) -> ProcessTree:
        if self.has_hole():
            raise ValueError("tree still has empty leaves")
        return self.tree


def _replace_first_hole(t: ProcessTree, fragment: ProcessTree):
    if t.hole:
        return fragment, True
    for i, c in enumerate(t.children):
        new, done = _replace_first_hole(c, fragment)
        if done:
            children = t.children[:i] + (new,) + t.children[i + 1:]
            return ProcessTree(operator=t.operator, children=children), True
    return t, False


def template(op: Operator, k: int) -> ProcessTree:
    """Operator node with ``k`` empty leaves."""
    return node(op, *([HOLE] * k))


def normalize(t: ProcessTree) -> ProcessTree:
    """Language-preserving clean-up.

    Nested SEQ/XOR/AND of the same operator are flattened, silent children
    of SEQ and AND are dropped, and an XOR keeps at most one tau child.
    Single-child results collapse into the child.
    """
    if t.is_leaf:
        return t
    children = [normalize(c) for c in t.children]
    if t.operator is Operator.LOOP:
        return ProcessTree(operator=t.operator, children=tuple(children))
    flat = []
    for c in children:
        if c.operator is t.operator:
            flat.extend(c.children)
        else:
            flat.append(c)
    if t.operator in (Operator.SEQ, Operator.AND):
        flat = [c for c in flat if not c.is_tau]
    else:
        out, seen_tau = [], False
        for c in flat:
            if c.is_tau:
                if seen_tau:
                    continue
                seen_tau = True
            out.append(c)
        flat = out
    if not flat:
        return TAU
    if len(flat) == 1:
        return flat[0]
    return ProcessTree(operator=t.operator, children=tuple(flat))


# text form

def _quote(label: str) -> str:
    return "'" + label.replace("\\", "\\\\").replace("'", "\\'") + "'"


def serialize(t: ProcessTree) -> str:
    if t.hole:
        return "?"
    if t.operator is None:
        return "tau" if t.label is None else _quote(t.label)
    return f"{t.operator.value}( " + ", ".join(serialize(c) for c in t.children) + " )"


class TreeSyntaxError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class _Parser:
    OPS = ("->", "X", "+", "*")

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, ch):
        self.skip()
        if not self.text.startswith(ch, self.pos):
            raise TreeSyntaxError(f"expected {ch!r}", self.pos)
        self.pos += len(ch)

    def parse(self) -> ProcessTree:
        t = self.tree()
        self.skip()
        if self.pos != len(self.text):
            raise TreeSyntaxError("trailing input", self.pos)
        return t

    def tree(self) -> ProcessTree:
        self.skip()
        start = self.pos
        if self.text.startswith("tau", self.pos):
            self.pos += 3
            return TAU
        if self.text.startswith("'", self.pos):
            return leaf(self.label())
        for op in self.OPS:
            if self.text.startswith(op, self.pos):
                self.pos += len(op)
                self.expect("(")
                children = [self.tree()]
                while True:
                    self.skip()
                    if self.text.startswith(",", self.pos):
                        self.pos += 1
                        children.append(self.tree())
                    else:
                        break
                self.expect(")")
                try:
                    return node(Operator(op), *children)
                except ValueError as exc:
                    raise TreeSyntaxError(str(exc), start) from None
        raise TreeSyntaxError("expected a tree", self.pos)

    def label(self) -> str:
        start = self.pos
        self.pos += 1
        out = []
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "\\" and self.pos + 1 < len(self.text):
                out.append(self.text[self.pos + 1])
                self.pos += 2
            elif ch == "'":
                self.pos += 1
                if not out:
                    raise TreeSyntaxError("empty activity label", start)
                return "".join(out)
            else:
                out.append(ch)
                self.pos += 1
        raise TreeSyntaxError("unterminated label", start)


def deserialize(text: str) -> ProcessTree:
    return _Parser(text).parse()


# JSON form

def to_dict(t: ProcessTree) -> dict:
    if t.operator is not None:
        return {"op": t.operator.name, "children": [to_dict(c) for c in t.children]}
    if t.label is None:
        return {"op": "TAU"}
    return {"op": "ACTIVITY", "label": t.label}


def from_dict(d: dict) -> ProcessTree:
    op = d["op"]
    if op == "TAU":
        return TAU
    if op == "ACTIVITY":
        return leaf(d["label"])
    return node(Operator[op], *(from_dict(c) for c in d["children"]))


def to_json(t: ProcessTree) -> str:
    return json.dumps({"tree": to_dict(t), "text": serialize(t)}, indent=2)
