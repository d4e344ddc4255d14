from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20251017)


def binomial_error_two_arms(n_best: int, p_best: float, n_other: int, p_other: float) -> float:
    """P(other arm's mean >= best arm's mean) for independent binomial counts.

    Equal means count as an error: both the successive-rejects and the
    uniform rules hand a tie to the higher index, and the best arm sits at
    index 0 in every caller.
    """
    a = np.arange(n_best + 1)
    pa = stats.binom.pmf(a, n_best, p_best)
    total = 0.0
    for x, w in zip(a, pa):
        # other mean >= x / n_best  <=>  count >= ceil(x * n_other / n_best)
        need = -(-x * n_other // n_best)
        total += w * stats.binom.sf(need - 1, n_other, p_other)
    return float(total)


def wilson(successes: int, trials: int, confidence: float):
    """Reference Wilson interval through scipy's normal quantile."""
    z = stats.norm.ppf(0.5 + confidence / 2)
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials**2)) / denom
    return centre - half, centre + half


def random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
