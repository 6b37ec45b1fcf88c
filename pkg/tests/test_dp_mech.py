import math

import numpy as np
import pytest
from scipy import stats

from dpim import dp_mech
from dpim.dp_mech import (BOTTOM, BudgetExceededError, BudgetLedger, RandomSource, laplace_noise,
                          rejection_sample, rejection_steps, report_noisy_max)


def test_laplace_moments():
    x = laplace_noise(RandomSource.seeded(1), 1.0, 10**6)
    assert abs(x.mean()) < 0.01
    assert abs(x.var() - 2.0) < 0.05


@pytest.mark.parametrize("b", [0.5, 1.0, 4.0])
def test_laplace_ks(b):
    x = laplace_noise(RandomSource.seeded(int(b * 10)), b, 10**5)
    assert stats.kstest(x, stats.laplace(scale=b).cdf).pvalue > 0.001


def test_laplace_scalar_and_bad_scale():
    assert isinstance(laplace_noise(RandomSource.seeded(0), 1.0), float)
    with pytest.raises(ValueError):
        laplace_noise(RandomSource.seeded(0), 0.0)


def test_seeded_streams_repeat():
    a = laplace_noise(RandomSource.seeded(42), 1.0, 100)
    b = laplace_noise(RandomSource.seeded(42), 1.0, 100)
    assert np.array_equal(a, b)


def test_secure_mode_by_default():
    assert RandomSource().mode == "secure"


def test_seeded_outside_tests_warns(monkeypatch):
    monkeypatch.delenv("PYTEST_CURRENT_TEST", raising=False)
    with pytest.warns(dp_mech.SeededRandomnessWarning):
        RandomSource.seeded(3)


def test_spawn_is_deterministic():
    a = [c.uniform() for c in RandomSource.seeded(5).spawn(3)]
    b = [c.uniform() for c in RandomSource.seeded(5).spawn(3)]
    assert a == b and len(set(a)) == 3


def test_significance_bar():
    assert dp_mech.significance_bar(4.0) == pytest.approx(11.3137, abs=1e-4)
    assert dp_mech.laplace_std(1.0) == pytest.approx(math.sqrt(2))


def test_renom_huge_eps_picks_max():
    rng = RandomSource.seeded(0)
    hits = sum(report_noisy_max(rng, [("HS", 25), ("SS", 0)], 1e6) == "HS" for _ in range(1000))
    assert hits >= 999


def test_renom_single_query():
    rng = RandomSource.seeded(0)
    assert all(report_noisy_max(rng, [("x", -5)], 0.01) == "x" for _ in range(50))


def test_renom_matches_argmax_at_huge_eps():
    gen = np.random.default_rng(3)
    rng = RandomSource.seeded(3)
    for _ in range(500):
        v = gen.permutation(20).astype(float)  # distinct values, unique argmax
        assert report_noisy_max(rng, list(enumerate(v)), 1e9) == int(np.argmax(v))


def renom_oracle(n, seed):
    """Direct simulation: two independent Laplace(1) draws added to 10 and 0."""
    g = np.random.default_rng(seed)
    return np.mean(10 + g.laplace(0, 1, n) > 0 + g.laplace(0, 1, n))


def test_renom_frequency_matches_monte_carlo():
    rng = RandomSource.seeded(11)
    n = 10**5
    freq = np.mean([report_noisy_max(rng, [("A", 10), ("B", 0)], 1.0) == "A" for _ in range(n)])
    assert abs(freq - renom_oracle(n, 12)) <= 0.01


def test_renom_rejects_bad_input():
    rng = RandomSource.seeded(0)
    with pytest.raises(ValueError):
        report_noisy_max(rng, [], 1.0)
    with pytest.raises(ValueError):
        report_noisy_max(rng, [("a", 1)], 0)


def test_rejection_steps_for_defaults():
    # ln(2/0.01)/0.01 = 529.8 -> 530; the other bound is 38
    assert rejection_steps(0.01, 0.01) == 530


def test_rejection_accepts_first():
    calls = []

    def trial():
        calls.append(1)
        return "c", 1.0

    assert rejection_sample(RandomSource.seeded(0), trial, 0.95, 0.01, 0.01) == ("c", 1.0)
    assert len(calls) == 1


def test_rejection_gamma_one_stops_after_one():
    calls = []

    def trial():
        calls.append(1)
        return "c", 0.0

    assert rejection_sample(RandomSource.seeded(0), trial, 0.95, 1.0, 0.01) is BOTTOM
    assert len(calls) == 1


def test_rejection_steps_lower_bound_enforced():
    with pytest.raises(ValueError):
        rejection_sample(RandomSource.seeded(0), lambda: (None, 1.0), 0.5, 0.01, 0.01, steps=10)


def acceptance_series(p, gamma, steps):
    return sum((1 - p) ** (k - 1) * (1 - gamma) ** (k - 1) * p for k in range(1, steps + 1))


def test_rejection_matches_series():
    rng = RandomSource.seeded(21)
    p, gamma = 0.5, 0.01
    runs = 10**4
    accepted = sum(
        rejection_sample(rng, lambda: (1, 1.0 if rng.uniform() < p else 0.0), 0.95, gamma, 0.01) is not BOTTOM
        for _ in range(runs))
    assert abs(accepted / runs - acceptance_series(p, gamma, rejection_steps(gamma, 0.01))) <= 0.02


def test_rejection_matches_series_low_p():
    rng = RandomSource.seeded(22)
    p, gamma = 0.05, 0.1
    runs = 10**4
    accepted = sum(
        rejection_sample(rng, lambda: (1, 1.0 if rng.uniform() < p else 0.0), 0.95, gamma, 0.5) is not BOTTOM
        for _ in range(runs))
    assert abs(accepted / runs - acceptance_series(p, gamma, rejection_steps(gamma, 0.5))) <= 0.02


def test_ledger_overspend():
    ledger = BudgetLedger(1.0).spend("a", 0.6)
    with pytest.raises(BudgetExceededError):
        ledger.spend("b", 0.5)
    assert ledger.spent == pytest.approx(0.6)


def test_ledger_shares_sum_to_total():
    eps1 = 0.62
    ledger = BudgetLedger(eps1)
    for r in (0.65, 0.25, 0.1):
        ledger.spend("r", r * eps1)
    assert ledger.spent == pytest.approx(eps1, abs=1e-12)
    assert ledger.spent_on("r") == pytest.approx(eps1)


def test_ledger_rejects_nonpositive():
    with pytest.raises(ValueError):
        BudgetLedger(0)
    with pytest.raises(ValueError):
        BudgetLedger(1).spend("x", 0)


def test_ledger_json_round_trip():
    import json
    ledger = BudgetLedger(1.0).spend("a", 0.25)
    assert json.loads(ledger.to_json()) == [{"label": "a", "amount": 0.25}]
