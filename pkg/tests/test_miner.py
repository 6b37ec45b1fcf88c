import numpy as np
import pytest

from dpim import dp_mech
from dpim.conformance import replay_fitness
from dpim.cuts import CutKind
from dpim.dfr import END, START, build_dfr, from_pairs
from dpim.dp_mech import BudgetLedger, RandomSource
from dpim.event_log import EventLog
from dpim.miner import (DpimConfig, MiningContext, SensitiveLog, _singleton, append_tree,
                        auto_bounds_unsafe, build_tree, detect_start_end, mine_baseline, mine_dp,
                        select_top_n)
from dpim.process_tree import TAU, deserialize, flower, leaf, loop, normalize, par, seq, xor

NOISY_EXAMPLE = {(START, "R"): 105.69, ("R", "H"): 97.23, ("R", END): 5.99, ("H", "S"): 22.31,
                ("S", "S"): 7.64, ("S", "D"): 31.02, (START, "S"): -2.16}


def context(table, log, *, std=0.0, eps_se=1e9, seed=0, **kw):
    return MiningContext(dp_dfr=table, std=std, log=SensitiveLog(log), rng=RandomSource.seeded(seed),
                         eps_start_end=eps_se, edge_threshold=0.5, **kw)


def positive_pairs(log):
    return from_pairs(log.alphabet, {p: c for p, c in build_dfr(log).items() if c > 0})


# selection

def test_top5_at_huge_eps(hospital):
    sel = select_top_n(build_dfr(hospital), 5, 1e9, RandomSource.seeded(0))
    assert set(sel.pairs()) == {(START, "R"), ("R", "H"), ("D", END), ("H", "M"), ("M", "D")}
    assert sel.count("H", "M") == pytest.approx(63, abs=1e-6)


def test_select_everything(hospital):
    raw = build_dfr(hospital)
    sel = select_top_n(raw, len(raw), 1.0, RandomSource.seeded(1))
    assert len(sel) == len(raw)


def test_select_bounds(hospital):
    raw = build_dfr(hospital)
    with pytest.raises(ValueError):
        select_top_n(raw, 0, 1.0, RandomSource.seeded(1))
    with pytest.raises(ValueError):
        select_top_n(raw, len(raw) + 1, 1.0, RandomSource.seeded(1))


def test_noisy_counts_select_self_loop():
    table = from_pairs("RHSD", NOISY_EXAMPLE)
    sel = select_top_n(table, 5, 1e9, RandomSource.seeded(2))
    assert ("S", "S") in sel and ("R", END) not in sel
    assert set(sel.pairs()) == {(START, "R"), ("R", "H"), ("S", "D"), ("H", "S"), ("S", "S")}


def test_select_spends_exactly_its_share(hospital):
    ledger = BudgetLedger(1.0)
    select_top_n(build_dfr(hospital), 7, 0.65, RandomSource.seeded(3), ledger)
    assert ledger.spent == pytest.approx(0.65, abs=1e-12)
    assert len(ledger.entries) == 14


# tree construction

def test_build_tree_on_positive_pairs(hospital):
    ctx = context(positive_pairs(hospital), hospital)
    tree = normalize(build_tree(ctx))
    assert tree == deserialize("->( 'R', 'H', X( 'M', 'S', tau ), 'D' )") or \
        tree == deserialize("->( 'R', 'H', X( tau, 'M', 'S' ), 'D' )")
    assert replay_fitness(tree, hospital) == 1.0


def test_single_activity_self_loop():
    log = EventLog((("A", "A"),) * 5)
    ctx = context(positive_pairs(log), log)
    assert build_tree(ctx) == loop(leaf("A"), TAU)


def test_uniform_clique_gives_flower():
    acts = "ABC"
    pairs = {(a, b): 60.0 for a in acts for b in acts if a != b}
    pairs.update({(START, a): 10.0 for a in acts})
    pairs.update({(a, END): 10.0 for a in acts})
    log = EventLog((("A", "B", "C"),))
    ctx = context(from_pairs(acts, pairs), log)
    assert build_tree(ctx) == flower(acts)


def _ctx_with_sizes(table, log, actc, esize, std):
    ctx = context(table, log, std=std)
    ctx.initialise()
    ctx.dp_actc = dict(actc)
    ctx.dp_esize = esize
    return ctx


def test_append_xor_with_empty_part(hospital):
    table = from_pairs("MS", {(START, "M"): 63, (START, "S"): 25, ("M", END): 63, ("S", END): 25})
    ctx = _ctx_with_sizes(table, hospital, {"M": 50, "S": 50}, 100, 0.1)
    tree = append_tree(ctx, CutKind.XOR, [frozenset("M"), frozenset("S"), frozenset()],
                       table, {"M", "S"}, {"M", "S"}, size=100)
    assert tree == xor(leaf("M"), leaf("S"), TAU)


def test_append_seq_recurses_into_multi_part(hospital):
    table = positive_pairs(hospital)
    ctx = context(table, hospital)
    ctx.initialise()
    tree = append_tree(ctx, CutKind.SEQ, [frozenset("R"), frozenset("H"), frozenset("MSD")],
                       table, ctx.dp_s, ctx.dp_e)
    assert tree.children[0] == leaf("R") and tree.children[1] == leaf("H")
    assert tree.children[2].activities() == {"M", "S", "D"}
    assert len(tree.children) == 3


def test_singleton_becomes_optional():
    log = EventLog((("S",),))
    table = from_pairs("S", {(START, "S"): 26, ("S", END): 26})
    ctx = _ctx_with_sizes(table, log, {"S": 26}, 103.5, 20)
    # 26 <= 103.5 - 20
    assert _singleton(ctx, table, "S", 103.5) == xor(TAU, leaf("S"))
    assert _singleton(ctx, table, "S", 30) == leaf("S")


def test_boundary_counts_walkthrough(hospital):
    c_start, c_end = SensitiveLog(hospital).boundary_counts({"S", "D"})
    assert c_start == {"D": 75, "S": 25}
    assert c_end == {"D": 100, "S": 0}


def test_start_end_exact_at_huge_eps(hospital):
    table = positive_pairs(hospital)
    ctx = context(table, hospital, eps_se=1e12)
    s, e = detect_start_end(ctx, CutKind.AND, [frozenset("S"), frozenset("D")], table, set(), set())
    assert s == {"D", "S"} and e == {"D"}


def test_start_end_survival_matches_laplace_tail(hospital):
    table = positive_pairs(hospital)
    runs, survived = 20000, 0
    ctx = context(table, hospital, seed=9)
    for _ in range(runs):
        ctx.eps_start_end = 2.0  # spends 1.0: scale 4, bar sqrt(8)*4
        _, e = detect_start_end(ctx, CutKind.AND, [frozenset("S"), frozenset("D")], table, set(), set())
        survived += "S" in e
    p = 0.5 * np.exp(-dp_mech.significance_bar(4.0) / 4.0)
    assert p == pytest.approx(0.0295, abs=1e-3)
    assert abs(survived / runs - p) <= 4 * np.sqrt(p * (1 - p) / runs)


def test_start_end_budget_halves(hospital):
    table = positive_pairs(hospital)
    ctx = context(table, hospital, eps_se=1.0)
    ctx.ledger = BudgetLedger(1.0)
    for _ in range(5):
        detect_start_end(ctx, CutKind.LOOP, [frozenset("S"), frozenset("D")], table, set(), set())
    assert ctx.start_end_spent == pytest.approx(1 - 2 ** -5)
    assert ctx.ledger.spent_on("start_end") == pytest.approx(ctx.start_end_spent)


# the full mechanism

def nonzero(log):
    return int((build_dfr(log).counts > 0).sum())


def test_non_private_run_recovers_hospital(hospital):
    cfg = DpimConfig(eps=1e5, lb=nonzero(hospital), ub=25)
    out = mine_dp(hospital, cfg, RandomSource.seeded(4))
    assert out.accepted
    assert replay_fitness(out.tree, hospital) == pytest.approx(1.0)
    assert out.tree.activities() == hospital.alphabet


def test_threshold_zero_accepts_first(hospital):
    out = mine_dp(hospital, DpimConfig(eps=0.5, t=0.0, lb=5, ub=25), RandomSource.seeded(5))
    assert out.accepted and len(out.trials) == 1


def test_accepted_outcomes_clear_threshold(hospital):
    outcomes = [mine_dp(hospital, DpimConfig(eps=1.25, lb=5, ub=25), RandomSource.seeded(s)) for s in range(50)]
    accepted = [o for o in outcomes if o.accepted]
    assert accepted  # the acceptance rate is recorded in the acceptance report
    assert all(o.noisy_fitness >= 0.95 for o in accepted)


def test_ledger_totals(hospital):
    cfg = DpimConfig(eps=1.25, lb=5, ub=25)
    out = mine_dp(hospital, cfg, RandomSource.seeded(6))
    assert out.ledger.spent == pytest.approx(1.25, abs=1e-9)
    assert out.ledger.spent == pytest.approx(2 * cfg.eps1 + cfg.eps0, abs=1e-9)
    r2 = cfg.shares[1]
    for rec in out.trials:
        assert rec["ledger"].spent <= cfg.eps1 * (1 + 1e-12)
        assert rec["start_end_spent"] <= r2 * cfg.eps1


def test_seeded_runs_repeat(hospital):
    cfg = DpimConfig(eps=1.25, lb=5, ub=25)
    a = mine_dp(hospital, cfg, RandomSource.seeded(8))
    b = mine_dp(hospital, cfg, RandomSource.seeded(8))
    assert a.as_dict() == b.as_dict()


class CountingLog(SensitiveLog):
    """Test double recording every read of the sensitive data."""

    def __init__(self, log):
        super().__init__(log)
        self.calls = {"directly_follows": 0, "boundary_counts": 0, "fitness": 0}

    def directly_follows(self):
        self.calls["directly_follows"] += 1
        return super().directly_follows()

    def boundary_counts(self, acts):
        self.calls["boundary_counts"] += 1
        return super().boundary_counts(acts)

    def fitness(self, tree):
        self.calls["fitness"] += 1
        return super().fitness(tree)


def test_raw_log_reads_are_all_accounted():
    log = EventLog.from_variants({("a", "b", "c"): 40, ("a", "c", "b"): 40, ("d", "a"): 20})
    spy = CountingLog(log)
    out = mine_dp(spy, DpimConfig(eps=2.0, lb=6, ub=12), RandomSource.seeded(10))
    assert spy.calls["directly_follows"] == 1
    assert spy.calls["fitness"] == len(out.trials)
    spends = sum(1 for rec in out.trials for lab, _ in rec["ledger"].entries if lab.startswith("start_end"))
    assert spy.calls["boundary_counts"] == spends


def test_config_validation():
    for bad in [dict(eps=0), dict(eps=0.005), dict(eps=1, shares=(0.5, 0.5, 0.5)),
                dict(eps=1, lb=3, ub=2), dict(eps=1, t=2), dict(eps=1, steps=3),
                dict(eps=1, size_reference="tree")]:
        kw = dict(lb=1, ub=2)
        kw.update(bad)
        with pytest.raises(ValueError):
            DpimConfig(**kw).validate()
    with pytest.raises(ValueError):
        DpimConfig(eps=1).validate()


def test_ub_above_domain(hospital):
    with pytest.raises(ValueError):
        mine_dp(hospital, DpimConfig(eps=1, lb=1, ub=1000), RandomSource.seeded(0))


def test_auto_bounds(hospital):
    assert auto_bounds_unsafe(hospital) == (5, 25)


def test_rounds_default():
    assert DpimConfig(eps=1).rounds == 530


# baseline

def test_baseline_hospital(hospital):
    tree = mine_baseline(hospital)
    assert tree == deserialize("->( 'R', 'H', X( tau, 'M', 'S' ), 'D' )")
    assert replay_fitness(tree, hospital) == 1.0


def test_baseline_small_logs():
    assert mine_baseline(EventLog((("A", "B"),))) == seq(leaf("A"), leaf("B"))
    assert mine_baseline(EventLog((("A", "B"), ("B", "A")))) == par(leaf("A"), leaf("B"))


def test_baseline_loop():
    tree = mine_baseline(EventLog.from_variants({("A",): 63, ("A", "B", "A"): 37}))
    assert tree == loop(leaf("A"), leaf("B"))


def test_baseline_empty():
    with pytest.raises(ValueError):
        mine_baseline(EventLog(()))
