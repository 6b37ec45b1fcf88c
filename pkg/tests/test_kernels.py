"""The numba and numpy/Python kernels must agree integer for integer."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpim import _accel, _kernels
from dpim.petri import to_petri_net
from test_process_tree import trees

needs_numba = pytest.mark.skipif(not _accel.NUMBA_AVAILABLE, reason="numba not installed")

codes = st.lists(st.lists(st.integers(0, 4), min_size=1, max_size=8), min_size=1, max_size=10)


def encode(traces):
    lengths = [len(t) for t in traces]
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    flat = np.array([a for t in traces for a in t], dtype=np.int64)
    return flat, offsets


@needs_numba
@settings(max_examples=100, deadline=None)
@given(codes)
def test_count_dfr_agrees(traces):
    flat, offsets = encode(traces)
    a = _kernels.count_dfr_numba(flat, offsets, 5)
    b = _kernels.count_dfr_numpy(flat, offsets, 5)
    assert np.array_equal(a, b)


@needs_numba
@settings(max_examples=100, deadline=None)
@given(trees(max_leaves=7), st.lists(st.lists(st.sampled_from("abcdez"), min_size=1, max_size=7),
                                     min_size=1, max_size=8))
def test_replay_agrees(t, traces):
    net = to_petri_net(t)
    acts = sorted({"a", "b", "c", "d", "e", "z"})
    pre, post, tlabel, source, sink = net.incidence(acts)
    flat, offsets = _kernels.encode_traces(traces, {a: i for i, a in enumerate(acts)})
    s1, f1 = _kernels.replay_variants_numba(pre, post, tlabel, source, sink, flat, offsets, 10_000)
    s2, f2 = _kernels.replay_variants_python(pre, post, tlabel, source, sink, flat, offsets, 10_000)
    assert np.array_equal(s1, s2)
    assert np.array_equal(f1, f2)


def test_encode_unknown_activity():
    flat, offsets = _kernels.encode_traces([("a", "q")], {"a": 0})
    assert flat.tolist() == [0, _kernels.UNKNOWN] and offsets.tolist() == [0, 2]


def test_disable_flag(monkeypatch):
    import importlib
    monkeypatch.setenv("DPIM_DISABLE_NUMBA", "1")
    mod = importlib.reload(_accel)
    try:
        assert mod.DISABLED and not mod.USE_NUMBA
    finally:
        monkeypatch.delenv("DPIM_DISABLE_NUMBA")
        importlib.reload(_accel)
