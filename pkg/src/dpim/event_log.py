"""Event logs: parsing (XES, CSV), the immutable log model, and summary counts."""

from __future__ import annotations

import csv
import io
import warnings
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence

RESERVED_LABELS = frozenset({"START", "END", "tau"})

Trace = tuple[str, ...]


class LogParseError(ValueError):
    """Raised when an event log cannot be read.

    ``line`` and ``column`` are set for XML syntax errors, ``row`` for CSV
    problems and ``trace_index`` for XES events without an activity name.
    """

    def __init__(self, message, *, line=None, column=None, row=None, trace_index=None):
        super().__init__(message)
        self.line = line
        self.column = column
        self.row = row
        self.trace_index = trace_index


class EmptyTraceWarning(UserWarning):
    pass


def normalize_label(raw: str) -> str:
    label = raw.strip()
    if not label:
        raise ValueError("activity label is empty")
    if label in RESERVED_LABELS:
        raise ValueError(f"activity label {label!r} is reserved")
    return label


@dataclass(frozen=True)
class EventLog:
    """A multiset of traces. Trace order is kept but carries no meaning."""

    traces: tuple[Trace, ...]
    alphabet: frozenset[str] = field(init=False)

    def __post_init__(self):
        traces = tuple(tuple(t) for t in self.traces)
        for t in traces:
            if not t:
                raise ValueError("traces must contain at least one activity")
            for a in t:
                if a in RESERVED_LABELS or not a:
                    raise ValueError(f"invalid activity label {a!r}")
        object.__setattr__(self, "traces", traces)
        object.__setattr__(self, "alphabet", frozenset(a for t in traces for a in t))

    @classmethod
    def from_variants(cls, variants: Mapping[Sequence[str], int] | Iterable[tuple[Sequence[str], int]]) -> "EventLog":
        items = variants.items() if isinstance(variants, Mapping) else variants
        traces = []
        for trace, count in items:
            traces.extend([tuple(trace)] * int(count))
        return cls(tuple(traces))

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    @property
    def activities(self) -> tuple[str, ...]:
        """Alphabet in sorted order; the canonical activity indexing."""
        return tuple(sorted(self.alphabet))

    def variants(self) -> Counter:
        return Counter(self.traces)

    def replace_trace(self, index: int, trace: Sequence[str]) -> "EventLog":
        """Neighbouring log: same size, one trace exchanged."""
        traces = list(self.traces)
        traces[index] = tuple(trace)
        return EventLog(tuple(traces))

    def to_csv(self, case_col="case", activity_col="activity", order_col="order") -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([case_col, activity_col, order_col])
        for i, trace in enumerate(self.traces):
            for j, a in enumerate(trace):
                writer.writerow([f"case{i}", a, j])
        return buf.getvalue()


@dataclass(frozen=True)
class LogStatistics:
    traces: int
    variants: int
    events: int
    activities: int

    def as_dict(self) -> dict:
        return {"traces": self.traces, "variants": self.variants,
                "events": self.events, "activities": self.activities}


def statistics(log: EventLog) -> LogStatistics:
    return LogStatistics(
        traces=len(log.traces),
        variants=len(set(log.traces)),
        events=sum(len(t) for t in log.traces),
        activities=len(log.alphabet),
    )


# XES

def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def parse_xes(data: bytes | str) -> EventLog:
    """Read the ``concept:name`` of every event, trace by trace.

    Only the activity name is used; timestamps, lifecycle transitions and
    other extensions are ignored. Traces without events are dropped and
    reported through an :class:`EmptyTraceWarning`.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, column = exc.position
        raise LogParseError(f"malformed XML at line {line}, column {column}: {exc}",
                            line=line, column=column) from None
    if _local(root.tag) != "log":
        raise LogParseError(f"expected <log> root element, found <{_local(root.tag)}>")

    traces = []
    dropped = 0
    for trace_index, trace_el in enumerate(el for el in root if _local(el.tag) == "trace"):
        acts = []
        for event_el in trace_el:
            if _local(event_el.tag) != "event":
                continue
            name = None
            for attr in event_el:
                if _local(attr.tag) == "string" and attr.get("key") == "concept:name":
                    name = attr.get("value")
                    break
            if name is None:
                raise LogParseError(f"event without concept:name in trace {trace_index}",
                                    trace_index=trace_index)
            try:
                acts.append(normalize_label(name))
            except ValueError as exc:
                raise LogParseError(f"trace {trace_index}: {exc}", trace_index=trace_index) from None
        if acts:
            traces.append(tuple(acts))
        else:
            dropped += 1
    if dropped:
        warnings.warn(f"dropped {dropped} empty trace(s)", EmptyTraceWarning, stacklevel=2)
    return EventLog(tuple(traces))


# CSV

def _order_key(value: str):
    value = value.strip()
    try:
        return (0, int(value))
    except ValueError:
        pass
    try:
        return (0, float(value))
    except ValueError:
        pass
    try:
        ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        return None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return (1, ts.timestamp())


def parse_csv(data: bytes | str, case_col: str, activity_col: str, order_col: str) -> EventLog:
    """Group rows by case and sort each case by ``order_col``.

    Order values are integers, floats, or ISO-8601 timestamps, one kind per
    file. The sort is stable so rows with equal order keep file order.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(data))
    header = reader.fieldnames or []
    for col in (case_col, activity_col, order_col):
        if col not in header:
            raise LogParseError(f"missing column {col!r}")

    cases: dict[str, list] = {}
    kind = None
    for seq, row in enumerate(reader):
        line = reader.line_num
        key = _order_key(row[order_col] or "")
        if key is None:
            raise LogParseError(f"row {line}: cannot order by value {row[order_col]!r}", row=line)
        if kind is None:
            kind = key[0]
        elif key[0] != kind:
            raise LogParseError(f"row {line}: order value {row[order_col]!r} mixes numbers and timestamps",
                                row=line)
        try:
            act = normalize_label(row[activity_col] or "")
        except ValueError as exc:
            raise LogParseError(f"row {line}: {exc}", row=line) from None
        cases.setdefault(row[case_col], []).append((key[1], seq, act))

    traces = []
    for rows in cases.values():
        rows.sort(key=lambda r: (r[0], r[1]))
        traces.append(tuple(r[2] for r in rows))
    return EventLog(tuple(traces))


def read_log(path, fmt: str | None = None, *, case_col="case", activity_col="activity",
             order_col="order") -> EventLog:
    """Read a log file, choosing the parser from ``fmt`` or the file suffix."""
    path = str(path)
    if fmt is None:
        fmt = "csv" if path.lower().endswith(".csv") else "xes"
    with open(path, "rb") as fh:
        data = fh.read()
    if fmt == "xes":
        return parse_xes(data)
    if fmt == "csv":
        return parse_csv(data, case_col, activity_col, order_col)
    raise ValueError(f"unknown log format {fmt!r}")
