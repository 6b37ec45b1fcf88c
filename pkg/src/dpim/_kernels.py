"""Hot loops: binary directly-follows counting and token-based replay.

Each kernel exists twice. The ``*_numba`` variants are compiled with
numba; the ``*_numpy`` / ``*_python`` variants need nothing beyond numpy.
The public names (:func:`count_dfr`, :func:`replay_variants`) dispatch on
``DPIM_DISABLE_NUMBA``. Both variants must produce identical integers.

Encoding shared by both kernels: activities are integer codes ``0..k-1``;
a batch of traces is a flat code array plus ``offsets`` of length
``n_traces + 1``.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# replay stats columns
PRODUCED, CONSUMED, MISSING, REMAINING = range(4)

SILENT = -1
UNKNOWN = -2


def encode_traces(traces, index):
    """Flatten traces into ``(codes, offsets)``; unknown activities map to ``UNKNOWN``."""
    lengths = np.fromiter((len(t) for t in traces), dtype=np.int64, count=len(traces))
    offsets = np.zeros(len(traces) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    flat = np.fromiter((index.get(a, UNKNOWN) for t in traces for a in t),
                       dtype=np.int64, count=int(offsets[-1]))
    return flat, offsets


# directly-follows counting

@njit
def count_dfr_numba(flat, offsets, k):
    out = np.zeros((k + 1, k + 1), dtype=np.int64)
    # stamp[i, j] = 1 + last trace that already counted pair (i, j)
    stamp = np.zeros((k + 1, k + 1), dtype=np.int64)
    n = offsets.shape[0] - 1
    for t in range(n):
        lo = offsets[t]
        hi = offsets[t + 1]
        if hi == lo:
            continue
        out[k, flat[lo]] += 1
        out[flat[hi - 1], k] += 1
        for i in range(lo, hi - 1):
            a = flat[i]
            b = flat[i + 1]
            if stamp[a, b] != t + 1:
                stamp[a, b] = t + 1
                out[a, b] += 1
    return out


def count_dfr_numpy(flat, offsets, k):
    flat = np.asarray(flat, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.int64)
    side = k + 1
    out = np.zeros(side * side, dtype=np.int64)
    lengths = np.diff(offsets)
    nonempty = lengths > 0
    firsts = flat[offsets[:-1][nonempty]]
    lasts = flat[offsets[1:][nonempty] - 1]
    out += np.bincount(k * side + firsts, minlength=side * side)
    out += np.bincount(lasts * side + k, minlength=side * side)
    if flat.size > 1:
        trace_id = np.repeat(np.arange(lengths.size, dtype=np.int64), lengths)
        same = trace_id[:-1] == trace_id[1:]
        pair = flat[:-1][same] * side + flat[1:][same]
        # one count per (trace, pair)
        keyed = np.unique(trace_id[:-1][same] * (side * side) + pair)
        out += np.bincount(keyed % (side * side), minlength=side * side)
    return out.reshape(side, side)


# token-based replay

@njit
def _marking_hash(m):
    h = np.int64(1469598103934665603)
    for p in range(m.shape[0]):
        h = h * np.int64(1099511628211) + np.int64(m[p] + 1)
    return h


@njit
def _enabled(m, pre, t):
    for p in range(m.shape[0]):
        if m[p] < pre[t, p]:
            return False
    return True


@njit
def _first_enabled_with_label(m, pre, tlabel, label):
    for t in range(tlabel.shape[0]):
        if tlabel[t] == label and _enabled(m, pre, t):
            return t
    return -1


@njit
def _is_final(m, sink):
    for p in range(m.shape[0]):
        want = 1 if p == sink else 0
        if m[p] != want:
            return False
    return True


@njit
def _silent_search(m0, pre, post, tlabel, silent, goal_label, sink, max_states):
    """Breadth-first search over silent firings from ``m0``.

    ``goal_label >= 0`` looks for a marking enabling a transition with that
    label; ``goal_label == -1`` looks for the exact final marking. Returns
    ``(states, parent, via, goal)`` with ``goal == -1`` when not found.
    """
    n_places = m0.shape[0]
    cap = 16
    states = np.empty((cap, n_places), dtype=np.int64)
    parent = np.empty(cap, dtype=np.int64)
    via = np.empty(cap, dtype=np.int64)
    states[0] = m0
    parent[0] = -1
    via[0] = -1
    seen = dict()
    seen[_marking_hash(m0)] = 0
    size = 1
    head = 0
    while head < size:
        cur = states[head]
        for s in range(silent.shape[0]):
            t = silent[s]
            if not _enabled(cur, pre, t):
                continue
            nxt = cur - pre[t] + post[t]
            h = _marking_hash(nxt)
            if h in seen:
                j = seen[h]
                same = True
                for p in range(n_places):
                    if states[j, p] != nxt[p]:
                        same = False
                        break
                if same:
                    continue
            if size >= max_states:
                return states, parent, via, -1
            if size == cap:
                cap *= 2
                grown = np.empty((cap, n_places), dtype=np.int64)
                grown[:size] = states[:size]
                states = grown
                gp = np.empty(cap, dtype=np.int64)
                gp[:size] = parent[:size]
                parent = gp
                gv = np.empty(cap, dtype=np.int64)
                gv[:size] = via[:size]
                via = gv
                cur = states[head]
            states[size] = nxt
            parent[size] = head
            via[size] = t
            seen[h] = size
            size += 1
            if goal_label >= 0:
                if _first_enabled_with_label(nxt, pre, tlabel, goal_label) >= 0:
                    return states, parent, via, size - 1
            elif _is_final(nxt, sink):
                return states, parent, via, size - 1
        head += 1
    return states, parent, via, -1


@njit
def _apply_path(states, parent, via, goal, pre, post, fires_row):
    produced = 0
    consumed = 0
    j = goal
    while parent[j] >= 0:
        t = via[j]
        fires_row[t] += 1
        consumed += pre[t].sum()
        produced += post[t].sum()
        j = parent[j]
    return states[goal].copy(), produced, consumed


@njit
def replay_variants_numba(pre, post, tlabel, source, sink, flat, offsets, max_states):
    n_trans, n_places = pre.shape
    n = offsets.shape[0] - 1
    stats = np.zeros((n, 4), dtype=np.int64)
    fires = np.zeros((n, n_trans), dtype=np.int64)
    n_silent = 0
    for t in range(n_trans):
        if tlabel[t] == -1:
            n_silent += 1
    silent = np.empty(n_silent, dtype=np.int64)
    j = 0
    for t in range(n_trans):
        if tlabel[t] == -1:
            silent[j] = t
            j += 1

    for v in range(n):
        m = np.zeros(n_places, dtype=np.int64)
        m[source] = 1
        produced = 1
        consumed = 0
        missing = 0
        for i in range(offsets[v], offsets[v + 1]):
            label = flat[i]
            first = -1
            if label >= 0:
                for t in range(n_trans):
                    if tlabel[t] == label:
                        first = t
                        break
            if first < 0:
                missing += 1
                consumed += 1
                continue
            t = _first_enabled_with_label(m, pre, tlabel, label)
            if t < 0 and n_silent > 0:
                states, parent, via, goal = _silent_search(
                    m, pre, post, tlabel, silent, label, sink, max_states)
                if goal >= 0:
                    m, dp, dc = _apply_path(states, parent, via, goal, pre, post, fires[v])
                    produced += dp
                    consumed += dc
                    t = _first_enabled_with_label(m, pre, tlabel, label)
            if t < 0:
                t = first
                for p in range(n_places):
                    if m[p] < pre[t, p]:
                        missing += pre[t, p] - m[p]
                        m[p] = pre[t, p]
            m = m - pre[t] + post[t]
            consumed += pre[t].sum()
            produced += post[t].sum()
            fires[v, t] += 1
        if not _is_final(m, sink) and n_silent > 0:
            states, parent, via, goal = _silent_search(
                m, pre, post, tlabel, silent, -1, sink, max_states)
            if goal >= 0:
                m, dp, dc = _apply_path(states, parent, via, goal, pre, post, fires[v])
                produced += dp
                consumed += dc
        consumed += 1
        if m[sink] > 0:
            m[sink] -= 1
        else:
            missing += 1
        stats[v, 0] = produced
        stats[v, 1] = consumed
        stats[v, 2] = missing
        stats[v, 3] = m.sum()
    return stats, fires


class PythonReplayer:
    """Token replay on tuple markings, also used stepwise by precision."""

    def __init__(self, pre, post, tlabel, source, sink, max_states=10_000):
        pre = np.asarray(pre)
        post = np.asarray(post)
        self.n_places = pre.shape[1]
        self.tlabel = [int(x) for x in tlabel]
        self.pre = [tuple((int(p), int(w)) for p, w in enumerate(row) if w) for row in pre]
        self.delta = [tuple(int(x) for x in row) for row in (post - pre)]
        self.n_in = [int(row.sum()) for row in pre]
        self.n_out = [int(row.sum()) for row in post]
        self.silent = [t for t, lab in enumerate(self.tlabel) if lab == SILENT]
        self.by_label = {}
        for t, lab in enumerate(self.tlabel):
            if lab >= 0:
                self.by_label.setdefault(lab, []).append(t)
        self.source = source
        self.sink = sink
        self.max_states = max_states
        self.initial = tuple(1 if p == source else 0 for p in range(self.n_places))
        self.final = tuple(1 if p == sink else 0 for p in range(self.n_places))

    def enabled(self, m, t):
        return all(m[p] >= w for p, w in self.pre[t])

    def fire(self, m, t):
        d = self.delta[t]
        return tuple(a + b for a, b in zip(m, d))

    def _first_enabled(self, m, label):
        for t in self.by_label.get(label, ()):
            if self.enabled(m, t):
                return t
        return -1

    def search(self, m0, goal):
        """Shortest silent path from ``m0`` to a marking satisfying ``goal``.

        Returns the list of fired silent transitions and the reached marking,
        or ``None`` when the bounded search fails.
        """
        states = [m0]
        parent = [-1]
        via = [-1]
        seen = {m0}
        head = 0
        while head < len(states):
            cur = states[head]
            for t in self.silent:
                if not self.enabled(cur, t):
                    continue
                nxt = self.fire(cur, t)
                if nxt in seen:
                    continue
                if len(states) >= self.max_states:
                    return None
                states.append(nxt)
                parent.append(head)
                via.append(t)
                seen.add(nxt)
                if goal(nxt):
                    path = []
                    j = len(states) - 1
                    while parent[j] >= 0:
                        path.append(via[j])
                        j = parent[j]
                    return path[::-1], nxt
            head += 1
        return None

    def silent_closure(self, m0):
        """All markings reachable from ``m0`` by silent firings (bounded)."""
        seen = {m0}
        frontier = [m0]
        while frontier and len(seen) < self.max_states:
            nxt_frontier = []
            for cur in frontier:
                for t in self.silent:
                    if self.enabled(cur, t):
                        nxt = self.fire(cur, t)
                        if nxt not in seen:
                            seen.add(nxt)
                            nxt_frontier.append(nxt)
            frontier = nxt_frontier
        return seen

    def visible_enabled(self, m):
        """Labels enabled in ``m`` directly or after silent firings."""
        labels = set()
        for mm in self.silent_closure(m):
            for t, lab in enumerate(self.tlabel):
                if lab >= 0 and lab not in labels and self.enabled(mm, t):
                    labels.add(lab)
        return labels

    def step(self, state, label, fires=None):
        """Replay one activity. ``state`` is ``[marking, produced, consumed, missing]``."""
        m, produced, consumed, missing = state
        candidates = self.by_label.get(label, ()) if label >= 0 else ()
        if not candidates:
            return [m, produced, consumed + 1, missing + 1]
        t = self._first_enabled(m, label)
        if t < 0 and self.silent:
            found = self.search(m, lambda mm: self._first_enabled(mm, label) >= 0)
            if found is not None:
                path, m = found
                for s in path:
                    produced += self.n_out[s]
                    consumed += self.n_in[s]
                    if fires is not None:
                        fires[s] += 1
                t = self._first_enabled(m, label)
        if t < 0:
            t = candidates[0]
            m = list(m)
            for p, w in self.pre[t]:
                if m[p] < w:
                    missing += w - m[p]
                    m[p] = w
            m = tuple(m)
        m = self.fire(m, t)
        if fires is not None:
            fires[t] += 1
        return [m, produced + self.n_out[t], consumed + self.n_in[t], missing]

    def finish(self, state, fires=None):
        m, produced, consumed, missing = state
        if m != self.final and self.silent:
            found = self.search(m, lambda mm: mm == self.final)
            if found is not None:
                path, m = found
                for s in path:
                    produced += self.n_out[s]
                    consumed += self.n_in[s]
                    if fires is not None:
                        fires[s] += 1
        consumed += 1
        m = list(m)
        if m[self.sink] > 0:
            m[self.sink] -= 1
        else:
            missing += 1
        return produced, consumed, missing, sum(m)

    def start(self):
        return [self.initial, 1, 0, 0]


def replay_variants_python(pre, post, tlabel, source, sink, flat, offsets, max_states):
    engine = PythonReplayer(pre, post, tlabel, source, sink, max_states)
    n = len(offsets) - 1
    stats = np.zeros((n, 4), dtype=np.int64)
    fires = np.zeros((n, len(engine.tlabel)), dtype=np.int64)
    flat = [int(x) for x in flat]
    for v in range(n):
        state = engine.start()
        row = fires[v]
        for i in range(int(offsets[v]), int(offsets[v + 1])):
            state = engine.step(state, flat[i], row)
        stats[v] = engine.finish(state, row)
    return stats, fires


def count_dfr(flat, offsets, k):
    """Binary directly-follows counts; row ``k`` is START, column ``k`` is END."""
    if USE_NUMBA:
        return count_dfr_numba(np.asarray(flat, dtype=np.int64), np.asarray(offsets, dtype=np.int64), k)
    return count_dfr_numpy(flat, offsets, k)


def replay_variants(pre, post, tlabel, source, sink, flat, offsets, max_states=10_000):
    """Replay each encoded trace; returns ``(stats, fires)``.

    ``stats[v]`` holds produced, consumed, missing and remaining tokens;
    ``fires[v, t]`` counts firings of transition ``t`` (silent included).
    """
    if USE_NUMBA:
        return replay_variants_numba(
            np.ascontiguousarray(pre, dtype=np.int64), np.ascontiguousarray(post, dtype=np.int64),
            np.asarray(tlabel, dtype=np.int64), int(source), int(sink),
            np.asarray(flat, dtype=np.int64), np.asarray(offsets, dtype=np.int64), int(max_states))
    return replay_variants_python(pre, post, tlabel, source, sink, flat, offsets, max_states)
