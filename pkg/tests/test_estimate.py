import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from purestate import checks
from purestate.estimate import (
    collision_estimator,
    collision_expectation,
    collision_variance_bound,
    haar_averaged_expectation,
)
from purestate.measure import OutcomeDistribution


def exact_moments(probs, m):
    """Mean and variance of the statistic over all d^m sequences, in exact rationals."""
    probs = [Fraction(p).limit_denominator(10**12) for p in probs]
    total = sum(probs)
    probs = [p / total for p in probs]
    mean = second = Fraction(0)
    for seq in itertools.product(range(len(probs)), repeat=m):
        w = Fraction(1)
        for x in seq:
            w *= probs[x]
        g = Fraction(sum(c * c for c in Counter(seq).values()), m * m) - Fraction(1, m)
        mean += w * g
        second += w * g * g
    return mean, second - mean * mean


@pytest.mark.parametrize("outcomes, d, expected", [
    ([0, 0], 2, 0.5),
    ([0, 1], 2, 0.0),
    ([0, 0, 1], 2, 2 / 9),
    ([3, 3, 3, 3], 4, 0.75),
])
def test_collision_examples(outcomes, d, expected):
    stat = collision_estimator(outcomes, d, basis_index=7)
    assert stat.g_tilde == pytest.approx(expected, abs=1e-15)
    assert stat.m == len(outcomes) and stat.basis_index == 7


def test_collision_errors():
    with pytest.raises(ValueError, match="m >= 2"):
        collision_estimator([0], 2)
    with pytest.raises(ValueError, match="outcomes"):
        collision_estimator([0, 2], 2)
    with pytest.raises(ValueError):
        collision_estimator([-1, 0], 2)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6).flatmap(
    lambda d: st.tuples(st.just(d), st.lists(st.integers(0, d - 1), min_size=2, max_size=40))))
def test_collision_range(case):
    d, outcomes = case
    m = len(outcomes)
    g = collision_estimator(outcomes, d).g_tilde
    assert -1 / m - 1e-15 <= g <= (m - 1) / m + 1e-15


def test_expectation_examples():
    assert collision_expectation(OutcomeDistribution([0.5, 0.5]), 2) == pytest.approx(0.25)
    assert collision_expectation(OutcomeDistribution([1.0, 0.0, 0.0]), 5) == pytest.approx(0.8)
    assert collision_expectation(OutcomeDistribution([0.8, 0.2]), 3) == pytest.approx(2 / 3 * 0.68)


def test_expectation_uniform_pairs_by_hand():
    # the four equally likely pairs give 0.5, 0, 0, 0.5
    assert np.mean([collision_estimator(list(p), 2).g_tilde
                    for p in itertools.product(range(2), repeat=2)]) == 0.25


def test_variance_bound_examples():
    point = OutcomeDistribution([1.0, 0.0])
    assert collision_variance_bound(point, 2) == pytest.approx(2.25)
    assert exact_moments([1.0, 0.0], 2)[1] == 0
    uni = OutcomeDistribution([0.5, 0.5])
    assert collision_variance_bound(uni, 2) == pytest.approx(0.625)
    assert exact_moments([0.5, 0.5], 2)[1] == Fraction(1, 16)
    skew = OutcomeDistribution([0.8, 0.2])
    assert float(exact_moments([0.8, 0.2], 3)[1]) <= collision_variance_bound(skew, 3)


def test_moment_errors():
    with pytest.raises(ValueError):
        collision_expectation(OutcomeDistribution([1.0]), 1)
    with pytest.raises(ValueError):
        collision_variance_bound(OutcomeDistribution([1.0]), 1)


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("m", [2, 3, 4])
def test_unbiased_against_exact_enumeration(d, m):
    r = np.random.default_rng(100 * d + m)
    for probs in (r.dirichlet(np.ones(d)), r.dirichlet(np.full(d, 0.3)), np.full(d, 1 / d)):
        dist = OutcomeDistribution(probs)
        mean, var = exact_moments(dist.probs, m)
        assert abs(float(mean) - collision_expectation(dist, m)) <= 1e-12
        assert float(var) <= collision_variance_bound(dist, m) + 1e-15


def test_package_enumerator_matches_rational_oracle():
    p = [0.7, 0.2, 0.1]
    mean, var = checks.enumerate_collision_moments(p, 3)
    em, ev = exact_moments(p, 3)
    assert mean == pytest.approx(float(em), abs=1e-14)
    assert var == pytest.approx(float(ev), abs=1e-14)


def test_haar_average_examples():
    assert haar_averaged_expectation(1.0, 2, 2) == pytest.approx(1 / 3)
    assert haar_averaged_expectation(0.25, 2, 4) == pytest.approx(0.125)
    assert haar_averaged_expectation(0.5, 1000, 2) == pytest.approx(0.4995)


@pytest.mark.parametrize("z, m, d", [(0.1, 2, 2), (1.2, 2, 2), (0.5, 1, 2), (0.5, 2, 1)])
def test_haar_average_domain(z, m, d):
    with pytest.raises(ValueError):
        haar_averaged_expectation(z, m, d)
