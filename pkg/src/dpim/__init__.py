"""Differentially private process discovery with an Inductive Miner baseline."""

from .conformance import QualityReport, evaluate, generalization, precision, replay_fitness, simplicity
from .dfr import DfrTable, build_dfr, restrict
from .dp_mech import BudgetLedger, RandomSource
from .event_log import EventLog, LogParseError, parse_csv, parse_xes, read_log, statistics
from .miner import DpimConfig, MiningOutcome, auto_bounds_unsafe, mine_baseline, mine_dp
from .petri import PetriNet, to_petri_net
from .process_tree import ProcessTree, deserialize, flower, serialize

__version__ = "0.1.0"

__all__ = [
    "BudgetLedger", "DfrTable", "DpimConfig", "EventLog", "LogParseError", "MiningOutcome",
    "PetriNet", "ProcessTree", "QualityReport", "RandomSource", "auto_bounds_unsafe", "build_dfr",
    "deserialize", "evaluate", "flower", "generalization", "mine_baseline", "mine_dp", "parse_csv",
    "parse_xes", "precision", "read_log", "replay_fitness", "restrict", "serialize", "simplicity",
    "statistics", "to_petri_net",
]
