"""Quick invariant suite behind ``purestate verify``.

Each check returns ``(name, passed, detail)``.  Sizes are small enough to
finish in seconds; the full-size versions live in the test suite.
"""
from __future__ import annotations

import itertools

import numpy as np

from . import estimate, lowerbound, measure, qcore
from .harness import random_hermitian, stream


def enumerate_collision_moments(probs, m: int) -> tuple[float, float]:
    """Exact mean and variance of the collision statistic by listing all d^m sequences."""
    probs = np.asarray(probs, dtype=float)
    d = probs.size
    mean = second = 0.0
    for seq in itertools.product(range(d), repeat=m):
        w = float(np.prod(probs[list(seq)]))
        counts = np.bincount(seq, minlength=d)
        g = float((counts**2).sum()) / m**2 - 1.0 / m
        mean += w * g
        second += w * g * g
    return mean, second - mean * mean


def check_haar_moments(seed: int):
    worst = 0.0
    for d in (2, 4):
        rng = stream(seed, 10, d)
        a, b, c = (random_hermitian(d, rng) for _ in range(3))
        rep = qcore.verify_haar_moments(a, b, c, 20000, rng)
        worst = max(worst, *rep.z_scores())
    return "haar_moments", worst <= 4.0, f"max |z| = {worst:.2f} (limit 4)"


def check_collision_enumeration(seed: int):
    rng = stream(seed, 11)
    worst_mean = 0.0
    var_ok = True
    for d, m in ((2, 2), (2, 3), (3, 2), (3, 3), (4, 2)):
        p = rng.dirichlet(np.ones(d))
        dist = measure.OutcomeDistribution(p)
        mean, var = enumerate_collision_moments(dist.probs, m)
        worst_mean = max(worst_mean, abs(mean - estimate.collision_expectation(dist, m)))
        var_ok &= var <= estimate.collision_variance_bound(dist, m) + 1e-15
    ok = worst_mean <= 1e-12 and var_ok
    return "collision_enumeration", ok, f"max mean gap {worst_mean:.2e}, variance bound held: {var_ok}"


def check_haar_average(seed: int):
    rng = stream(seed, 12)
    m, n = 4, 4000
    worst = 0.0
    for d, z in ((2, 0.75), (4, 0.5)):
        rho = qcore.depolarized_state(qcore.UnitaryMatrix.identity(d), qcore.alpha_from_purity(z, d), d)
        p = measure.rotated_probabilities(rho.mat, qcore.haar_unitaries(d, n, rng))
        vals = (m - 1) / m * (p * p).sum(axis=1)
        se = vals.std(ddof=1) / np.sqrt(n)
        worst = max(worst, abs(vals.mean() - estimate.haar_averaged_expectation(z, m, d)) / se)
    return "haar_averaged_law", worst <= 4.0, f"max |z| = {worst:.2f} (limit 4)"


def check_swap_law(seed: int):
    rng = stream(seed, 13)
    worst = 0.0
    n = 100_000
    for z in (0.5, 0.68, 0.9):
        p = measure.swap_accept_probability(z)
        mean = measure.swap_test_samples(z, n, rng).mean()
        worst = max(worst, abs(mean - p) / np.sqrt(p * (1 - p) / n))
    return "swap_law", worst <= 3.0, f"max |z| = {worst:.2f} (limit 3)"


def check_affine_identity(seed: int):
    rng = stream(seed, 14)
    worst = 0.0
    for d in (2, 4, 8, 16):
        for _ in range(3):
            zs = np.sort(rng.uniform(1.0 / d, 1.0, size=3))[::-1]
            inst = lowerbound.random_instance(zs, d, rng)
            h = random_hermitian(d, rng)
            lam, v = np.linalg.eigh(h)
            m0 = (v * rng.uniform(0, 1, d)) @ v.conj().T
            worst = max(worst, lowerbound.affine_identity_check(inst, measure.TwoOutcomePovm(m0)))
    return "affine_identity", worst <= 1e-10, f"max residual {worst:.2e} (limit 1e-10)"


def check_concentration(seed: int):
    rng = stream(seed, 15)
    trials = 2000
    rep = lowerbound.concentration_experiment(measure.TwoOutcomePovm.projector(16, 8), 0.3, trials, rng)
    frac_ok = rep.in_window_fraction >= 0.75 - 3 * np.sqrt(0.25 / trials)
    var_ok = rep.empirical_variance <= rep.variance_bound + 3 * rep.variance_se
    return ("concentration", frac_ok and var_ok,
            f"in-window {rep.in_window_fraction:.3f}, var {rep.empirical_variance:.3e} "
            f"<= bound {rep.variance_bound:.3e}")


def check_purity_routes(seed: int):
    rng = stream(seed, 16)
    worst = 0.0
    for d in (2, 4, 8):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        rho = qcore.DensityMatrix(g @ g.conj().T / np.trace(g @ g.conj().T).real)
        worst = max(worst, abs(qcore.purity(rho) - qcore.purity_by_product(rho)))
    return "purity_routes", worst <= 1e-12, f"max gap {worst:.2e}"


ALL_CHECKS = (
    check_haar_moments,
    check_collision_enumeration,
    check_haar_average,
    check_swap_law,
    check_affine_identity,
    check_concentration,
    check_purity_routes,
)


def run_all(seed: int = 2025):
    return [chk(seed) for chk in ALL_CHECKS]
