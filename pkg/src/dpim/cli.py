"""Command line: ``dpim mine``, ``dpim compare`` and ``dpim stats``.

Exit codes: 0 success, 1 usage or input error, 2 the private miner
returned Bottom (a legitimate private outcome; do not retry blindly,
every run spends the full budget again).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .conformance import evaluate
from .dp_mech import RandomSource, SeededRandomnessWarning
from .event_log import LogParseError, read_log, statistics
from .miner import SIZE_REFERENCES, DpimConfig, auto_bounds_unsafe, mine_baseline, mine_dp
from .petri import to_petri_net
from .process_tree import to_dict

EXIT_OK, EXIT_USAGE, EXIT_BOTTOM = 0, 1, 2

DEFAULT_EPS_LIST = (3.75, 1.25, 0.125)

AUTO_BOUNDS_WARNING = (
    "WARNING: --auto-bounds-UNSAFE derives lb/ub from the raw directly-follows relation. "
    "This is NOT differentially private and leaks information about the log; "
    "use it only for experiments on data you are allowed to see.")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_input(p):
    p.add_argument("--input", required=True, help="event log (.xes or .csv)")
    p.add_argument("--format", choices=("xes", "csv"), help="default: from the file suffix")
    p.add_argument("--case-col", default="case")
    p.add_argument("--activity-col", default="activity")
    p.add_argument("--order-col", default="order")


def _add_mining(p):
    p.add_argument("--eps0", type=float, default=0.01)
    p.add_argument("--shares", type=_floats, default=[0.65, 0.25, 0.1], help="r1,r2,r3")
    p.add_argument("--threshold", type=float, default=0.95, help="fitness threshold t")
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--steps", type=int, help="rejection rounds T (default: smallest valid)")
    p.add_argument("--lb", type=int)
    p.add_argument("--ub", type=int)
    p.add_argument("--auto-bounds-UNSAFE", dest="auto_bounds", action="store_true",
                   help="derive lb/ub from the raw log (not private)")
    p.add_argument("--edge-threshold", type=float, default=DpimConfig.edge_threshold)
    p.add_argument("--size-reference", choices=SIZE_REFERENCES, default=DpimConfig.size_reference)
    p.add_argument("--seed", type=int, help="reproducible run for testing; gives no privacy")
    p.add_argument("--config", help="JSON file whose keys mirror the long flags")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dpim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    mine = sub.add_parser("mine", help="mine a process tree under differential privacy")
    _add_input(mine)
    mine.add_argument("--eps", type=float, help="total privacy budget (required, here or in --config)")
    _add_mining(mine)
    mine.add_argument("--out", required=True, help="tree JSON")
    mine.add_argument("--emit-pnml")
    mine.add_argument("--emit-dot", help="Petri net of the mined tree as DOT")
    mine.add_argument("--emit-ledger", help="budget ledger JSON")
    mine.add_argument("--manifest", help="run manifest JSON")
    mine.add_argument("--evaluate", action="store_true",
                      help="add quality metrics on the input log to the manifest (not private)")
    mine.set_defaults(func=cmd_mine)

    cmp_ = sub.add_parser("compare", help="metrics of DPIM over several eps against the baseline miner")
    _add_input(cmp_)
    cmp_.add_argument("--eps-list", type=_floats, default=list(DEFAULT_EPS_LIST))
    cmp_.add_argument("--runs", type=int, default=1)
    cmp_.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    _add_mining(cmp_)
    cmp_.add_argument("--out", required=True, help="report CSV")
    cmp_.set_defaults(func=cmd_compare)

    stats = sub.add_parser("stats", help="print log statistics as JSON")
    _add_input(stats)
    stats.set_defaults(func=cmd_stats)
    return parser


# helpers

def _load(args):
    try:
        return read_log(args.input, args.format, case_col=args.case_col,
                        activity_col=args.activity_col, order_col=args.order_col)
    except FileNotFoundError:
        raise UsageError(f"cannot read {args.input}: no such file") from None
    except (OSError, LogParseError, ValueError) as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from None


def _apply_config(args, parser_defaults: dict):
    """Values from --config fill in flags left at their defaults."""
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config) as fh:
            conf = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(conf, dict):
        raise UsageError("config file must hold a JSON object")
    for key, value in conf.items():
        attr = key.replace("-", "_")
        if attr == "auto_bounds_UNSAFE":
            attr = "auto_bounds"
        if not hasattr(args, attr):
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, attr) == parser_defaults.get(attr):
            if attr in ("shares", "eps_list") and isinstance(value, str):
                value = _floats(value)
            setattr(args, attr, value)


def _seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DPIM_SEED")
    if env is None:
        return None
    if "PYTEST_CURRENT_TEST" not in os.environ:
        print("dpim: ignoring DPIM_SEED outside the test suite", file=sys.stderr)
        return None
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"DPIM_SEED must be an integer, got {env!r}") from None


def _rng(seed):
    if seed is None:
        return RandomSource()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SeededRandomnessWarning)
        rng = RandomSource.seeded(seed)
    if "PYTEST_CURRENT_TEST" not in os.environ:
        print("dpim: seeded run, reproducible and NOT private", file=sys.stderr)
    return rng


def _config(args, log, eps: float) -> DpimConfig:
    lb, ub = args.lb, args.ub
    if args.auto_bounds:
        print(AUTO_BOUNDS_WARNING, file=sys.stderr)
        if lb is not None or ub is not None:
            raise UsageError("--auto-bounds-UNSAFE cannot be combined with --lb/--ub")
        lb, ub = auto_bounds_unsafe(log)
    elif lb is None or ub is None:
        raise UsageError("either --lb and --ub or --auto-bounds-UNSAFE is required")
    if len(args.shares) != 3:
        raise UsageError("--shares needs three values r1,r2,r3")
    cfg = DpimConfig(eps=eps, eps0=args.eps0, shares=tuple(args.shares), t=args.threshold,
                     gamma=args.gamma, lb=lb, ub=ub, steps=args.steps,
                     edge_threshold=args.edge_threshold, size_reference=args.size_reference)
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _write(path, text: str):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None


# subcommands

def cmd_mine(args) -> int:
    started = time.perf_counter()
    if args.eps is None:
        raise UsageError("--eps is required")
    if not args.eps > 0:
        raise UsageError(f"--eps must satisfy eps > 0, got {args.eps}")
    log = _load(args)
    if len(log) == 0:
        raise UsageError(f"{args.input} contains no traces")
    cfg = _config(args, log, args.eps)
    seed = _seed(args)
    try:
        outcome = mine_dp(log, cfg, _rng(seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    metrics = None
    if outcome.accepted:
        tree_doc = {"tree": to_dict(outcome.tree), "text": str(outcome.tree),
                    "noisy_fitness": outcome.noisy_fitness}
        _write(args.out, json.dumps(tree_doc, indent=2) + "\n")
        net = to_petri_net(outcome.tree)
        if args.emit_pnml:
            _write(args.emit_pnml, net.to_pnml())
        if args.emit_dot:
            _write(args.emit_dot, net.to_dot())
        if args.evaluate:
            print("dpim: --evaluate reads the raw log; the metrics are not private", file=sys.stderr)
            metrics = evaluate(net, log).as_dict()
    if args.emit_ledger:
        _write(args.emit_ledger, outcome.ledger.to_json() + "\n")
    if args.manifest:
        manifest = {
            "input": {"path": os.path.abspath(args.input), "format": args.format or
                      ("csv" if args.input.lower().endswith(".csv") else "xes")},
            "config": cfg.as_dict(),
            "seed": seed,
            "outcome": outcome.as_dict(),
            "metrics": metrics,
            "ledger": json.loads(outcome.ledger.to_json()),
            "version": __version__,
            "wall_time_s": time.perf_counter() - started,
        }
        _write(args.manifest, json.dumps(manifest, indent=2) + "\n")
    if not outcome.accepted:
        print("dpim: rejected (Bottom); no tree released", file=sys.stderr)
        return EXIT_BOTTOM
    print(str(outcome.tree))
    return EXIT_OK


FIELDS = ["method", "eps", "run", "accepted", "noisy_fitness",
          "fitness", "precision", "simplicity", "generalization"]


def _compare_job(job):
    log, cfg, run, rng = job
    outcome = mine_dp(log, cfg, rng)
    row = {"method": "dpim", "eps": cfg.eps, "run": run, "accepted": outcome.accepted,
           "noisy_fitness": outcome.noisy_fitness}
    if outcome.accepted:
        row.update(evaluate(outcome.tree, log).as_dict())
    return row


def cmd_compare(args) -> int:
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    if not args.eps_list or any(not e > 0 for e in args.eps_list):
        raise UsageError("--eps-list needs positive values")
    log = _load(args)
    if len(log) == 0:
        raise UsageError(f"{args.input} contains no traces")
    configs = [_config(args, log, eps) for eps in args.eps_list]
    seed = _seed(args)
    master = _rng(seed)
    streams = master.spawn(len(configs) * args.runs)
    jobs = [(log, cfg, run, streams[i * args.runs + run])
            for i, cfg in enumerate(configs) for run in range(args.runs)]
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                rows = list(pool.map(_compare_job, jobs))
        else:
            rows = [_compare_job(j) for j in jobs]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows.sort(key=lambda r: (-r["eps"], r["run"]))
    base = {"method": "im", "eps": "", "run": "", "accepted": True, "noisy_fitness": ""}
    base.update(evaluate(mine_baseline(log), log).as_dict())
    try:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=FIELDS, restval="")
            writer.writeheader()
            writer.writerow(base)
            writer.writerows(rows)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc}") from None
    return EXIT_OK


def cmd_stats(args) -> int:
    log = _load(args)
    print(json.dumps(statistics(log).as_dict()))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    defaults = {a.dest: a.default for sp in parser._subparsers._group_actions
                for p in sp.choices.values() for a in p._actions}
    try:
        _apply_config(args, defaults)
        return args.func(args)
    except UsageError as exc:
        print(f"dpim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
