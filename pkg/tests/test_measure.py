import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import random_density
from purestate import measure, qcore
from purestate.measure import (
    OutcomeDistribution,
    RotatedBasis,
    TwoOutcomePovm,
    povm_accept_prob,
    rotated_basis_distribution,
    rotated_probabilities,
    sample_outcomes,
    shared_support,
    swap_test_sample,
    swap_test_samples,
)
from purestate.qcore import DensityMatrix, InvariantError, UnitaryMatrix, sample_haar_unitary

HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


# -- rotated bases ---------------------------------------------------------------

def test_projectors_resolve_identity(rng):
    for d in (2, 3, 6):
        proj = RotatedBasis(sample_haar_unitary(d, rng)).projectors()
        assert np.abs(proj.sum(axis=0) - np.eye(d)).max() <= 1e-9
        assert np.allclose(proj @ proj, proj, atol=1e-12)


def test_mixed_state_is_uniform_in_any_basis(rng):
    dist = rotated_basis_distribution(DensityMatrix(np.eye(4) / 4), RotatedBasis(sample_haar_unitary(4, rng)))
    assert np.allclose(dist.probs, 0.25, atol=1e-12)


def test_ket_zero_in_computational_basis():
    dist = rotated_basis_distribution(DensityMatrix(np.diag([1.0, 0, 0])), RotatedBasis(UnitaryMatrix.identity(3)))
    assert np.array_equal(dist.probs, [1.0, 0.0, 0.0])


def test_ket_zero_in_hadamard_basis():
    dist = rotated_basis_distribution(DensityMatrix(np.diag([1.0, 0.0])), RotatedBasis(UnitaryMatrix(HADAMARD)))
    assert np.allclose(dist.probs, [0.5, 0.5], atol=1e-15)


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="d="):
        rotated_basis_distribution(DensityMatrix(np.eye(2) / 2), RotatedBasis(UnitaryMatrix.identity(3)))


@settings(max_examples=30, deadline=None)
@given(d=st.integers(2, 8), seed=st.integers(0, 2**32 - 1))
def test_outcome_law_bounds(d, seed):
    r = np.random.default_rng(seed)
    rho = DensityMatrix(random_density(d, r))
    p = rotated_basis_distribution(rho, RotatedBasis(sample_haar_unitary(d, r))).probs
    assert abs(p.sum() - 1) <= 1e-9
    assert 1 / d - 1e-12 <= (p * p).sum() <= 1 + 1e-12


def test_batched_probabilities_match_single(rng):
    rho = random_density(5, rng)
    us = qcore.haar_unitaries(5, 20, rng)
    batch = rotated_probabilities(rho, us)
    for u, row in zip(us, batch):
        single = rotated_basis_distribution(DensityMatrix(rho), RotatedBasis(UnitaryMatrix(u))).probs
        assert np.allclose(row, single, atol=1e-13)


# -- outcome distributions ---------------------------------------------------------

def test_outcome_distribution_clamps_noise():
    dist = OutcomeDistribution([1.0 + 5e-13, -5e-13])
    assert dist.probs[1] == 0.0 and dist.probs.sum() == 1.0


@pytest.mark.parametrize("probs", [[1.1, -0.1], [0.5, 0.4], [], [0.5, -1e-6, 0.5]])
def test_outcome_distribution_rejects(probs):
    with pytest.raises(InvariantError):
        OutcomeDistribution(probs)


# -- sampling ------------------------------------------------------------------------

def test_point_mass_sampling(rng):
    assert sample_outcomes(OutcomeDistribution([1.0, 0.0]), 5, rng).tolist() == [0] * 5
    assert set(sample_outcomes(OutcomeDistribution([0.0, 0.0, 1.0]), 50, rng).tolist()) == {2}


def test_fair_coin_frequency(rng):
    n = 100_000
    freq = np.mean(sample_outcomes(OutcomeDistribution([0.5, 0.5]), n, rng) == 0)
    assert abs(freq - 0.5) <= 3 * np.sqrt(0.25 / n)


def test_uniform_chi_square(rng):
    x = sample_outcomes(OutcomeDistribution(np.full(4, 0.25)), 40_000, rng)
    assert stats.chisquare(np.bincount(x, minlength=4)).pvalue > 0.01


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_born_rule_consistency(seed):
    r = np.random.default_rng(seed)
    d = 4
    rho = DensityMatrix(random_density(d, r))
    dist = rotated_basis_distribution(rho, RotatedBasis(sample_haar_unitary(d, r)))
    n = 40_000
    counts = np.bincount(sample_outcomes(dist, n, r), minlength=d)
    assert stats.chisquare(counts, dist.probs * n).pvalue > 0.01


def test_sample_outcomes_needs_m():
    with pytest.raises(ValueError):
        sample_outcomes(OutcomeDistribution([1.0]), 0, np.random.default_rng(0))


# -- shared support --------------------------------------------------------------------

@pytest.mark.parametrize("rotation, rank", [("shared", 1), ("none", 1), ("independent", 3)])
def test_shared_support_reproduces_full_law(rotation, rank, rng):
    ens = qcore.make_ensemble(qcore.EnsembleSpec([0.95, 0.8, 0.5], 6, rotation=rotation), rng)
    sup = shared_support(ens.matrices())
    assert sup.rank == rank
    us = qcore.haar_unitaries(6, 40, rng)
    for k, rho in enumerate(ens.matrices()):
        assert np.allclose(sup.probabilities(k, us @ sup.basis), rotated_probabilities(rho, us), atol=1e-13)


def test_shared_support_full_rank_states(rng):
    mats = [random_density(4, rng) for _ in range(3)]
    sup = shared_support(mats)
    assert sup.rank == 4
    us = qcore.haar_unitaries(4, 10, rng)
    for k, rho in enumerate(mats):
        assert np.allclose(sup.probabilities(k, us @ sup.basis), rotated_probabilities(rho, us), atol=1e-12)


def test_shared_support_all_mixed():
    sup = shared_support([np.eye(3) / 3, np.eye(3) / 3])
    assert sup.rank == 0
    assert np.allclose(sup.probabilities(1, np.empty((4, 3, 0))), 1 / 3)


def test_isometry_law_matches_full_unitaries(rng):
    # p_0 of a rank-one depolarized state, via full unitaries and via isometries
    ens = qcore.make_ensemble(qcore.EnsembleSpec([0.9, 0.6], 8), rng)
    sup = shared_support(ens.matrices())
    a = sup.probabilities(0, qcore.haar_isometries(8, sup.rank, 10_000, rng))[:, 0]
    b = rotated_probabilities(ens.matrices()[0], qcore.haar_unitaries(8, 10_000, rng))[:, 0]
    assert stats.ks_2samp(a, b).pvalue > 0.01


# -- SWAP test ---------------------------------------------------------------------------

@pytest.mark.parametrize("z", [0.5, 0.68, 0.9, 1.0])
def test_swap_law(z, rng):
    n = 100_000
    p = (1 + z) / 2
    mean = swap_test_samples(z, n, rng).mean()
    se = np.sqrt(p * (1 - p) / n)
    assert abs(mean - p) <= 3 * se if se > 0 else mean == 1.0


def test_swap_single_draws(rng):
    assert all(swap_test_sample(1.0, rng) == 1 for _ in range(200))
    assert abs(np.mean([swap_test_sample(0.0, rng) for _ in range(20_000)]) - 0.5) <= 3 * np.sqrt(0.25 / 20_000)


@pytest.mark.parametrize("z", [-0.1, 1.2])
def test_swap_rejects_bad_purity(z, rng):
    with pytest.raises(ValueError):
        swap_test_sample(z, rng)
    with pytest.raises(ValueError):
        swap_test_samples(z, 3, rng)


# -- two-outcome POVMs -------------------------------------------------------------------

def test_povm_effects_sum_to_identity(rng):
    h = random_density(4, rng)
    povm = TwoOutcomePovm(h / np.linalg.eigvalsh(h)[-1])
    assert np.array_equal(povm.m0 + povm.m1, np.eye(4))
    assert np.linalg.eigvalsh(povm.m1)[0] >= -1e-9


def test_light_effect_selection():
    heavy = TwoOutcomePovm(np.diag([1.0, 1.0, 1.0, 0.0]))
    assert heavy.trace_m == pytest.approx(1.0)
    assert np.array_equal(heavy.light, np.diag([0.0, 0.0, 0.0, 1.0]))
    tie = TwoOutcomePovm(np.eye(2) / 2)
    assert tie.light is tie.m0


@pytest.mark.parametrize("m0", [np.diag([1.5, 0.0]), np.array([[0.5, 0.2], [0.0, 0.5]]), np.ones((2, 3))])
def test_povm_rejects(m0):
    with pytest.raises(InvariantError):
        TwoOutcomePovm(m0)


def test_projector_constructor():
    p = TwoOutcomePovm.projector(4, 2)
    assert np.array_equal(np.diag(p.m0).real, [1, 1, 0, 0])
    with pytest.raises(ValueError):
        TwoOutcomePovm.projector(4, 5)


def test_accept_prob_examples(rng):
    half = TwoOutcomePovm(np.eye(3) / 2)
    assert povm_accept_prob(DensityMatrix(random_density(3, rng)), half) == pytest.approx(0.5, abs=1e-12)
    p0 = TwoOutcomePovm(np.diag([1.0, 0.0]))
    assert povm_accept_prob(DensityMatrix(np.diag([1.0, 0.0])), p0) == 1.0
    assert povm_accept_prob(DensityMatrix(np.eye(2) / 2), p0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        povm_accept_prob(DensityMatrix(np.eye(3) / 3), p0)


def test_swap_accept_probability():
    assert measure.swap_accept_probability(0.5) == 0.75
