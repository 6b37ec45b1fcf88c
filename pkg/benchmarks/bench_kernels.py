"""Compare the numba kernels with the numpy/Python fallbacks.

    python benchmarks/bench_kernels.py --traces 20000

Both paths are called directly, so DPIM_DISABLE_NUMBA does not matter
here. The first numba call (compilation, or loading the cache) is
excluded from the timings.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from dpim import _accel, _kernels
from dpim.petri import to_petri_net
from dpim.process_tree import deserialize

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from synthetic import synthetic_log  # noqa: E402

MODEL = "->( 'a', *( ->( 'b', X( 'c', 'd' ) ), 'e' ), +( 'f', 'g', X( 'h', tau ) ), 'i' )"


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--traces", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    if not _accel.NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare")
        return 1

    log = synthetic_log(MODEL, args.traces, seed=args.seed)
    acts = log.activities
    index = {a: i for i, a in enumerate(acts)}
    flat, offsets = _kernels.encode_traces(log.traces, index)

    variants = sorted(log.variants())
    vflat, voffsets = _kernels.encode_traces(variants, index)
    net = to_petri_net(deserialize(MODEL))
    pre, post, tlabel, source, sink = net.incidence(acts)

    cases = {
        "count_dfr (all traces)": (
            lambda: _kernels.count_dfr_numba(flat, offsets, len(acts)),
            lambda: _kernels.count_dfr_numpy(flat, offsets, len(acts))),
        f"replay ({len(variants)} variants)": (
            lambda: _kernels.replay_variants_numba(pre, post, tlabel, source, sink, vflat, voffsets, 10_000),
            lambda: _kernels.replay_variants_python(pre, post, tlabel, source, sink, vflat, voffsets, 10_000)),
    }
    print(f"{len(log)} traces, {int(offsets[-1])} events, {len(variants)} variants")
    print(f"{'kernel':28s} {'numba [ms]':>11s} {'fallback [ms]':>14s} {'speed-up':>9s}")
    for name, (fast, slow) in cases.items():
        a, b = fast(), slow()  # warm-up, and a consistency check
        if isinstance(a, tuple):
            same = all(np.array_equal(x, y) for x, y in zip(a, b))
        else:
            same = np.array_equal(a, b)
        if not same:
            print(f"{name}: results differ")
            return 1
        tf, ts = best_of(fast, args.repeat), best_of(slow, args.repeat)
        print(f"{name:28s} {tf * 1e3:11.2f} {ts * 1e3:14.2f} {ts / tf:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
