"""Collision purity statistic and its closed-form moments."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .measure import OutcomeDistribution


@dataclass(frozen=True)
class CollisionStat:
    g_tilde: float
    m: int
    basis_index: int = 0


@dataclass(frozen=True)
class PhaseStat:
    """Running mean ``w`` of one state's per-unit statistics after a phase.

    ``n_bases`` counts collision statistics (incoherent mode) or SWAP tests
    (coherent mode).
    """

    w: float
    state_id: int
    phase: int
    n_bases: int


def _check_m(m):
    if m < 2:
        raise ValueError(f"collision statistic needs m >= 2, got {m}")


def collision_estimator(outcomes: Sequence[int], d: int, basis_index: int = 0) -> CollisionStat:
    """(1/m^2) * sum_i count_i^2 - 1/m over a bucket count of the outcomes."""
    x = np.asarray(outcomes, dtype=np.int64)
    m = x.size
    _check_m(m)
    if x.min() < 0 or x.max() >= d:
        raise ValueError(f"outcomes must lie in [0, {d - 1}]")
    g = kernels.collision_stats(x[None, :], d)[0]
    return CollisionStat(float(g), m, basis_index)


def collision_expectation(dist: OutcomeDistribution, m: int) -> float:
    _check_m(m)
    p = dist.probs
    return (m - 1) / m * float(np.sum(p * p))


def collision_variance_bound(dist: OutcomeDistribution, m: int) -> float:
    """2 E[g]/m^2 + (4/m) sum p_i^3."""
    _check_m(m)
    p = dist.probs
    return 2.0 * collision_expectation(dist, m) / (m * m) + 4.0 / m * float(np.sum(p**3))


def haar_averaged_expectation(z: float, m: int, d: int) -> float:
    """Expectation of the collision statistic over a Haar-random basis."""
    _check_m(m)
    if d < 2:
        raise ValueError("d must be >= 2")
    if z < 1.0 / d - 1e-10 or z > 1.0 + 1e-10:
        raise ValueError(f"purity {z} outside [1/d, 1]")
    return (m - 1) * (1.0 + z) / (m * (d + 1))
