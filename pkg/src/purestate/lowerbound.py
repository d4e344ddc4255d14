"""Hard instances for fixed two-outcome POVMs.

All K states share one Haar rotation U, so a fixed effect M turns each
state into a Bernoulli arm whose parameter is affine in the state's
depolarizing weight alpha_k:

    Tr(M tau_k) = c(M, U) * alpha_k + Tr(M)/d,   c = <0|U^dag M U|0> - Tr(M)/d.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .identify import run_bernoulli_arms
from .measure import TwoOutcomePovm, povm_accept_prob
from .qcore import (
    TIE_MARGIN,
    InvariantError,
    UnitaryMatrix,
    alpha_from_purity,
    depolarized_state,
    haar_isometries,
    haar_unitaries,
)

# |c| at or below this is treated as an uninformative measurement
C_ZERO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PrqsiInstance:
    zs: tuple
    alphas: tuple
    u: UnitaryMatrix
    dim: int
    states: tuple

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.zs))


def build_prqsi_states(zs: Sequence[float], d: int, u: UnitaryMatrix) -> PrqsiInstance:
    zs = tuple(float(z) for z in zs)
    if len(zs) < 2:
        raise InvariantError("need at least two states")
    top = sorted(zs, reverse=True)
    if top[0] - top[1] < TIE_MARGIN:
        raise InvariantError(f"top purities tie at {top[0]}")
    if u.dim != d:
        raise ValueError(f"unitary has d={u.dim}, expected {d}")
    alphas = tuple(alpha_from_purity(z, d) for z in zs)
    states = tuple(depolarized_state(u, a, d) for a in alphas)
    return PrqsiInstance(zs, alphas, u, d, states)


def c_coefficient(povm: TwoOutcomePovm, u: UnitaryMatrix) -> float:
    if povm.dim != u.dim:
        raise ValueError(f"POVM has d={povm.dim}, unitary has d={u.dim}")
    psi = u.mat[:, 0]
    m = povm.light
    return float((psi.conj() @ m @ psi).real - np.trace(m).real / povm.dim)


def affine_identity_check(inst: PrqsiInstance, povm: TwoOutcomePovm) -> float:
    """Largest |Tr(M tau_k) - (c alpha_k + Tr(M)/d)| over the instance."""
    c = c_coefficient(povm, inst.u)
    offset = np.trace(povm.light).real / inst.dim
    return max(
        abs(povm_accept_prob(s, povm) - (c * a + offset)) for s, a in zip(inst.states, inst.alphas)
    )


def arm_parameters(inst: PrqsiInstance, povm: TwoOutcomePovm) -> np.ndarray:
    return np.array([povm_accept_prob(s, povm) for s in inst.states])


@dataclass(frozen=True)
class ConcentrationReport:
    trials: int
    in_window_fraction: float
    window_halfwidth: float
    empirical_variance: float
    variance_bound: float
    variance_se: float
    mean_deviation: float


def accept_probabilities(povm: TwoOutcomePovm, alpha: float, us: np.ndarray) -> np.ndarray:
    """Tr(M tau(U)) for each U in a stack; only U|0> matters."""
    m = povm.light
    d = povm.dim
    psi = us[:, :, 0]
    overlap = np.einsum("si,ij,sj->s", psi.conj(), m, psi).real
    return alpha * overlap + (1.0 - alpha) * np.trace(m).real / d


def concentration_experiment(povm: TwoOutcomePovm, alpha: float, trials: int,
                             rng: np.random.Generator) -> ConcentrationReport:
    """Spread of the light effect's acceptance probability over Haar rotations.

    The window is |p - Tr(M)/d| < 2 alpha sqrt(Tr M)/d; the variance bound is
    alpha^2 Tr(M) / (d (d + 1)).
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    d = povm.dim
    tr_m = float(np.trace(povm.light).real)
    p = accept_probabilities(povm, alpha, haar_isometries(d, 1, trials, rng))
    dev = p - tr_m / d
    half = 2.0 * alpha * np.sqrt(tr_m) / d
    # alpha = 0 gives a zero-width window with p exactly at its centre up to rounding
    inside = np.abs(dev) < half if half > 0 else np.abs(dev) <= 1e-15
    # SE of the sample variance from the fourth central moment
    c = p - p.mean()
    var = float(np.mean(c * c) * trials / (trials - 1))
    m4 = float(np.mean(c**4))
    var_se = float(np.sqrt(max(m4 - var * var, 0.0) / trials))
    return ConcentrationReport(
        trials=trials,
        in_window_fraction=float(inside.mean()),
        window_halfwidth=float(half),
        empirical_variance=var,
        variance_bound=alpha * alpha * tr_m / (d * (d + 1)),
        variance_se=var_se,
        mean_deviation=float(dev.mean()),
    )


def fixed_povm_bandit_trial(inst: PrqsiInstance, povm: TwoOutcomePovm, n: int, allocator: str,
                            rng: np.random.Generator) -> int:
    """Run a classical learner on the Bernoulli arms induced by ``povm``.

    A positive c means purer states accept more often, so the learner looks
    for the largest parameter; a negative c flips that.  With c = 0 the
    arms are identical and the answer is a uniform guess.
    """
    k = len(inst.zs)
    if n < k:
        raise ValueError(f"N={n} is smaller than K={k}")
    c = c_coefficient(povm, inst.u)
    if abs(c) <= C_ZERO_TOL:
        return int(rng.integers(k))
    params = arm_parameters(inst, povm)
    return run_bernoulli_arms(params, n, rng, allocator=allocator, maximize=c > 0).selected


def in_window(povm: TwoOutcomePovm, alpha: float, u: UnitaryMatrix) -> bool:
    """Whether U lies in the concentration window for this effect and weight."""
    d = povm.dim
    tr_m = float(np.trace(povm.light).real)
    p = accept_probabilities(povm, alpha, u.mat[None])[0]
    return abs(p - tr_m / d) < 2.0 * alpha * np.sqrt(tr_m) / d


def random_instance(zs: Sequence[float], d: int, rng: np.random.Generator) -> PrqsiInstance:
    return build_prqsi_states(zs, d, UnitaryMatrix(haar_unitaries(d, 1, rng)[0]))

