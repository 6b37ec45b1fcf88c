"""Frequency-annotated directly-follows relations with dummy START and END.

A :class:`DfrTable` over activities ``a_0..a_{k-1}`` is a ``(k+1, k+1)``
matrix. Row ``i < k`` is ``a_i`` as the first element of a pair and row ``k``
is START; column ``j < k`` is ``a_j`` as the second element and column ``k``
is END. ``present`` marks which pairs belong to the table's domain: every
pair for a raw table, only the selected pairs for a noisy one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from . import _kernels
from .event_log import EventLog

START = "START"
END = "END"

RAW = "raw"
NOISY = "noisy"


@dataclass(frozen=True, eq=False)
class DfrTable:
    alphabet: tuple[str, ...]
    counts: np.ndarray
    present: np.ndarray
    kind: str = RAW

    def __post_init__(self):
        k = len(self.alphabet)
        if self.counts.shape != (k + 1, k + 1) or self.present.shape != (k + 1, k + 1):
            raise ValueError("count matrix does not match the alphabet")
        if self.kind not in (RAW, NOISY):
            raise ValueError(f"unknown table kind {self.kind!r}")
        self.counts.setflags(write=False)
        self.present.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.alphabet)

    def index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.alphabet)}

    def _row(self, a: str) -> int:
        if a == START:
            return self.size
        if a == END:
            raise KeyError("END never starts a pair")
        return self.alphabet.index(a)

    def _col(self, b: str) -> int:
        if b == END:
            return self.size
        if b == START:
            raise KeyError("START never ends a pair")
        return self.alphabet.index(b)

    def _label(self, i: int, row: bool) -> str:
        if i == self.size:
            return START if row else END
        return self.alphabet[i]

    def __contains__(self, pair) -> bool:
        a, b = pair
        try:
            return bool(self.present[self._row(a), self._col(b)])
        except (KeyError, ValueError):
            return False

    def count(self, a: str, b: str) -> float:
        i, j = self._row(a), self._col(b)
        if not self.present[i, j]:
            raise KeyError(f"pair ({a}, {b}) is not in the table")
        return float(self.counts[i, j])

    def get(self, a: str, b: str, default=None):
        if (a, b) not in self:
            return default
        return self.count(a, b)

    def items(self) -> Iterator[tuple[tuple[str, str], float]]:
        rows, cols = np.nonzero(self.present)
        for i, j in zip(rows.tolist(), cols.tolist()):
            yield (self._label(i, True), self._label(j, False)), float(self.counts[i, j])

    def pairs(self) -> list[tuple[str, str]]:
        return [p for p, _ in self.items()]

    def __len__(self) -> int:
        return int(self.present.sum())

    def as_dict(self) -> dict[tuple[str, str], float]:
        return dict(self.items())

    def to_csv(self) -> str:
        lines = ["from,to,count"]
        for (a, b), c in self.items():
            value = str(int(c)) if self.kind == RAW else repr(c)
            lines.append(f"{a},{b},{value}")
        return "\n".join(lines) + "\n"

    def to_dot(self, *, skip_zero: bool = True) -> str:
        lines = ["digraph dfr {", "  rankdir=LR;"]
        for (a, b), c in self.items():
            if skip_zero and self.kind == RAW and c == 0:
                continue
            label = f"{int(c)}" if self.kind == RAW else f"{c:.2f}"
            lines.append(f'  "{a}" -> "{b}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_dfr(log: EventLog) -> DfrTable:
    """Count, per pair, the number of traces in which it occurs at least once.

    Pairs with a dummy endpoint count the first and last activity of every
    trace. The table covers the full product set, zero-count pairs included.
    """
    if len(log) == 0:
        raise ValueError("cannot build a directly-follows relation from an empty log")
    alphabet = log.activities
    index = {a: i for i, a in enumerate(alphabet)}
    flat, offsets = _kernels.encode_traces(log.traces, index)
    counts = _kernels.count_dfr(flat, offsets, len(alphabet)).astype(float)
    present = np.ones_like(counts, dtype=bool)
    return DfrTable(alphabet, counts, present, RAW)


def from_pairs(alphabet: Iterable[str], pairs: dict[tuple[str, str], float], kind: str = NOISY) -> DfrTable:
    """Table whose domain is exactly ``pairs``."""
    alphabet = tuple(sorted(alphabet))
    k = len(alphabet)
    counts = np.zeros((k + 1, k + 1))
    present = np.zeros((k + 1, k + 1), dtype=bool)
    index = {a: i for i, a in enumerate(alphabet)}
    index_row = dict(index, **{START: k})
    index_col = dict(index, **{END: k})
    for (a, b), c in pairs.items():
        i, j = index_row[a], index_col[b]
        counts[i, j] = c
        present[i, j] = True
    return DfrTable(alphabet, counts, present, kind)


def restrict(dfr: DfrTable, acts: Iterable[str]) -> DfrTable:
    """Keep the pairs whose non-dummy endpoints all lie in ``acts``."""
    acts = set(acts)
    missing = acts - set(dfr.alphabet)
    if missing:
        raise ValueError(f"activities {sorted(missing)} are not in the table's alphabet")
    keep = [i for i, a in enumerate(dfr.alphabet) if a in acts]
    idx = np.array(keep + [dfr.size], dtype=np.intp)
    sub = np.ix_(idx, idx)
    return DfrTable(tuple(dfr.alphabet[i] for i in keep), dfr.counts[sub].copy(),
                    dfr.present[sub].copy(), dfr.kind)


def successors(dfr: DfrTable, a: str, present_threshold: float = 0.0) -> set[str]:
    """Activities ``b`` with a pair ``(a, b)`` counted at least ``present_threshold``."""
    if a == END:
        return set()
    i = dfr._row(a)
    row_ok = dfr.present[i, :-1] & (dfr.counts[i, :-1] >= present_threshold)
    return {dfr.alphabet[j] for j in np.flatnonzero(row_ok)}


def predecessors(dfr: DfrTable, b: str, present_threshold: float = 0.0) -> set[str]:
    if b == START:
        return set()
    j = dfr._col(b)
    col_ok = dfr.present[:-1, j] & (dfr.counts[:-1, j] >= present_threshold)
    return {dfr.alphabet[i] for i in np.flatnonzero(col_ok)}
