"""Differential-privacy primitives.

Laplace noise by inverse-CDF sampling, Report Noisy Max, the rejection
sampler for private candidate selection, and a budget ledger.
"""

from __future__ import annotations

import json
import math
import os
import secrets
import warnings
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

BOTTOM = None
"""Value returned by :func:`rejection_sample` when it gives up."""

LEDGER_SLACK = 1e-12


class SeededRandomnessWarning(UserWarning):
    """Seeded randomness is reproducible and therefore not private."""


class BudgetExceededError(RuntimeError):
    pass


def _under_test() -> bool:
    return "PYTEST_CURRENT_TEST" in os.environ


class RandomSource:
    """Single-owner stream of uniform draws.

    ``RandomSource()`` is seeded from the operating system's CSPRNG.
    ``RandomSource.seeded(n)`` gives a reproducible stream for tests and
    warns when used outside a test run.
    """

    def __init__(self, seed: int | None = None):
        self.seed = seed
        if seed is None:
            self.mode = "secure"
            self._gen = np.random.Generator(np.random.PCG64(secrets.randbits(128)))
        else:
            self.mode = "seeded"
            if not _under_test():
                warnings.warn("seeded randomness is for testing only and gives no privacy guarantee",
                              SeededRandomnessWarning, stacklevel=3)
            self._gen = np.random.Generator(np.random.PCG64(seed))

    @classmethod
    def seeded(cls, seed: int) -> "RandomSource":
        return cls(int(seed))

    def uniform(self, size=None):
        return self._gen.random(size)

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in ``[low, high]``."""
        return int(self._gen.integers(low, high, endpoint=True))

    def spawn(self, n: int) -> list["RandomSource"]:
        """Independent child streams (deterministic under a seed)."""
        children = []
        for i in range(n):
            if self.seed is None:
                children.append(RandomSource())
            else:
                child = RandomSource.__new__(RandomSource)
                child.seed = (self.seed, i)
                child.mode = "seeded"
                child._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, i])))
                children.append(child)
        return children


def laplace_noise(rng: RandomSource, scale: float, size=None):
    """Draws from Laplace(0, scale): ``-scale * sign(u) * ln(1 - 2|u|)``, u ~ U(-1/2, 1/2)."""
    if not scale > 0:
        raise ValueError(f"Laplace scale must be positive, got {scale}")
    u = np.asarray(rng.uniform(size)) - 0.5
    # u == -0.5 has probability 2**-53 and would give an infinite draw
    while np.any(u == -0.5):
        bad = u == -0.5
        if u.ndim == 0:
            u = np.asarray(rng.uniform()) - 0.5
        else:
            u[bad] = rng.uniform(int(bad.sum())) - 0.5
    out = -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return float(out) if size is None else out


def laplace_sample(rng: RandomSource, scale: float) -> float:
    return laplace_noise(rng, scale)


def laplace_std(scale: float) -> float:
    return math.sqrt(2.0) * scale


def significance_bar(scale: float) -> float:
    """Twice the standard deviation of Laplace(0, scale), i.e. sqrt(8) * scale."""
    return math.sqrt(8.0) * scale


def report_noisy_max(rng: RandomSource, queries: Sequence[tuple[Hashable, float]], eps: float):
    """Key of the largest ``count + Lap(1/eps)``; ties go to the earlier query.

    Only the key is released. Counts must have sensitivity 1.
    """
    if not queries:
        raise ValueError("report_noisy_max needs at least one query")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    counts = np.fromiter((float(c) for _, c in queries), dtype=float, count=len(queries))
    noisy = counts + laplace_noise(rng, 1.0 / eps, len(queries))
    return queries[int(np.argmax(noisy))][0]


def rejection_steps(gamma: float, eps0: float) -> int:
    """Smallest integer number of rounds satisfying the sampler's lower bound."""
    return max(math.ceil(math.log(2.0 / eps0) / gamma), math.ceil(1.0 + 1.0 / (math.e * gamma)))


def _check_rejection_params(gamma, eps0, steps):
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if not 0 < eps0 <= 1:
        raise ValueError(f"eps0 must lie in (0, 1], got {eps0}")
    if steps < rejection_steps(gamma, eps0):
        raise ValueError(f"T={steps} is below the minimum {rejection_steps(gamma, eps0)} "
                         f"for gamma={gamma}, eps0={eps0}")


def rejection_sample(rng: RandomSource, trial: Callable[[], tuple], t: float, gamma: float,
                     eps0: float, steps: int | None = None):
    """Run ``trial`` until its score reaches ``t``.

    After every failed trial a coin with bias ``gamma`` decides whether to
    stop early. Returns the accepted ``(candidate, score)`` or ``BOTTOM``.
    """
    if steps is None:
        steps = rejection_steps(gamma, eps0)
    _check_rejection_params(gamma, eps0, steps)
    for _ in range(steps):
        candidate, score = trial()
        if score >= t:
            return candidate, score
        if rng.uniform() < gamma:
            return BOTTOM
    return BOTTOM


@dataclass
class BudgetLedger:
    """Sequential-composition ledger: spends may never exceed ``total``."""

    total: float
    entries: list[tuple[str, float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.total > 0:
            raise ValueError(f"ledger total must be positive, got {self.total}")

    @property
    def spent(self) -> float:
        return math.fsum(a for _, a in self.entries)

    @property
    def remaining(self) -> float:
        return self.total - self.spent

    def spend(self, label: str, amount: float) -> "BudgetLedger":
        if not amount > 0:
            raise ValueError(f"spend {label!r} must be positive, got {amount}")
        if self.spent + amount > self.total * (1 + LEDGER_SLACK):
            raise BudgetExceededError(
                f"spend {label!r} of {amount:g} exceeds the remaining budget {self.remaining:g}")
        self.entries.append((label, float(amount)))
        return self

    def spent_on(self, prefix: str) -> float:
        return math.fsum(a for lab, a in self.entries if lab.startswith(prefix))

    def to_json(self) -> str:
        return json.dumps([{"label": lab, "amount": a} for lab, a in self.entries], indent=2)


def ledger_spend(ledger: BudgetLedger, label: str, amount: float) -> BudgetLedger:
    return ledger.spend(label, amount)
