"""Rotated-basis outcome laws, Born-rule sampling, SWAP tests and two-outcome POVMs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .qcore import DensityMatrix, InvariantError, UnitaryMatrix, is_hermitian

PROB_TOL = 1e-12
SUM_TOL = 1e-9
POVM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class RotatedBasis:
    """Projective measurement onto {U^dag |i><i| U}."""

    u: UnitaryMatrix

    @property
    def dim(self) -> int:
        return self.u.dim

    def projectors(self) -> np.ndarray:
        rows = self.u.mat.conj().T  # columns U^dag|i>
        return np.einsum("ai,bi->iab", rows, rows.conj())


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).ravel()
        if p.size < 1:
            raise InvariantError("empty distribution")
        if np.any(p < -PROB_TOL) or np.any(p > 1 + PROB_TOL):
            raise InvariantError(f"probabilities out of range: min {p.min():.3g}, max {p.max():.3g}")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise InvariantError(f"probabilities sum to {p.sum():.12g}")
        p = np.clip(p, 0.0, 1.0)
        p /= p.sum()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def dim(self) -> int:
        return self.probs.size


def rotated_probabilities(rho: np.ndarray, us: np.ndarray) -> np.ndarray:
    """Diagonals of U rho U^dag for a stack of unitaries, shape (B, d).

    Negative float noise is clipped and rows renormalized.
    """
    p = np.einsum("bij,jk,bik->bi", us, rho, us.conj(), optimize=True).real
    np.clip(p, 0.0, None, out=p)
    p /= p.sum(axis=1, keepdims=True)
    return p


@dataclass(frozen=True, eq=False)
class SharedSupport:
    """rho_k = shift_k I + Q B_k Q^dag with one d x r isometry Q for every state.

    Only U Q enters diag(U rho_k U^dag), and for Haar U that product has the
    law of the first r columns of a Haar unitary, so a family with small r
    can be measured in Haar bases without drawing full d x d unitaries.
    """

    shifts: np.ndarray
    blocks: np.ndarray
    basis: np.ndarray

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def probabilities(self, k: int, ws: np.ndarray) -> np.ndarray:
        """Outcome laws of state ``k`` for a stack of isometries W = U Q, shape (B, d)."""
        if self.rank == 0:
            d = ws.shape[1]
            return np.full((ws.shape[0], d), 1.0 / d)
        if self.rank == 1:
            p = self.shifts[k] + self.blocks[k, 0, 0].real * (ws[:, :, 0].real ** 2 + ws[:, :, 0].imag ** 2)
        else:
            x = ws @ self.blocks[k]
            p = self.shifts[k] + np.einsum("bir,bir->bi", x, ws.conj()).real
        np.clip(p, 0.0, None, out=p)
        p /= p.sum(axis=1, keepdims=True)
        return p


def shared_support(mats, tol: float = 1e-12) -> SharedSupport:
    """Split each state into a multiple of I plus a part on a common subspace.

    Falls back to the full space (Q = I) if the reconstruction misses by
    more than 1e-10.
    """
    mats = [np.asarray(a, dtype=np.complex128) for a in mats]
    d = mats[0].shape[0]
    shifts, parts = [], []
    for rho in mats:
        lam, vec = np.linalg.eigh(rho)
        shifts.append(lam[0])
        parts.append(vec[:, lam - lam[0] > tol])
    stack = np.hstack(parts)
    if stack.shape[1] == 0:
        q = np.empty((d, 0), dtype=np.complex128)
    else:
        left, sv, _ = np.linalg.svd(stack, full_matrices=False)
        q = left[:, sv > 1e-8 * sv[0]]
    shifts = np.array(shifts)
    blocks = np.array([q.conj().T @ (rho - s * np.eye(d)) @ q for rho, s in zip(mats, shifts)])
    blocks = blocks.reshape(len(mats), q.shape[1], q.shape[1])
    worst = max(np.max(np.abs(s * np.eye(d) + q @ b @ q.conj().T - rho))
                for rho, s, b in zip(mats, shifts, blocks))
    if worst > 1e-10:
        q = np.eye(d, dtype=np.complex128)
        shifts = np.zeros(len(mats))
        blocks = np.array(mats)
    return SharedSupport(shifts, blocks, q)


def rotated_basis_distribution(rho: DensityMatrix, basis: RotatedBasis) -> OutcomeDistribution:
    if rho.dim != basis.dim:
        raise ValueError(f"state has d={rho.dim}, basis has d={basis.dim}")
    u = basis.u.mat
    diag = np.diagonal(u @ rho.mat @ u.conj().T)
    if np.max(np.abs(diag.imag)) > PROB_TOL:
        raise InvariantError("outcome probabilities have an imaginary residue")
    return OutcomeDistribution(diag.real)


def sample_outcomes(dist: OutcomeDistribution, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` i.i.d. categorical draws by inverse CDF."""
    if m < 1:
        raise ValueError("m must be >= 1")
    u = rng.random((1, m))
    return kernels.categorical_draws(dist.probs[None, :], u)[0]


def swap_accept_probability(z: float) -> float:
    return 0.5 * (1.0 + z)


def _check_swap_purity(z):
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"purity {z} outside [0, 1]")


def swap_test_sample(z: float, rng: np.random.Generator) -> int:
    """One SWAP test on two copies of a state with purity ``z``.

    Returns 1 when the ancilla reports "same" (probability (1 + z)/2), so
    the bit grows with purity.
    """
    _check_swap_purity(z)
    return int(rng.random() < swap_accept_probability(z))


def swap_test_samples(z: float, n: int, rng: np.random.Generator) -> np.ndarray:
    _check_swap_purity(z)
    return (rng.random(n) < swap_accept_probability(z)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class TwoOutcomePovm:
    """{M0, M1 = I - M0}.  ``light`` is the effect with the smaller trace (ties -> M0)."""

    m0: np.ndarray

    def __post_init__(self):
        a = np.array(self.m0, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvariantError(f"effect must be square, got {a.shape}")
        if not is_hermitian(a, POVM_TOL):
            raise InvariantError("effect is not Hermitian")
        lam = np.linalg.eigvalsh(a)
        if lam[0] < -1e-9 or lam[-1] > 1 + 1e-9:
            raise InvariantError(f"effect eigenvalues [{lam[0]:.3g}, {lam[-1]:.3g}] outside [0, 1]")
        a.setflags(write=False)
        object.__setattr__(self, "m0", a)

    @property
    def dim(self) -> int:
        return self.m0.shape[0]

    @property
    def m1(self) -> np.ndarray:
        return np.eye(self.dim) - self.m0

    @property
    def trace_m(self) -> float:
        t = float(np.trace(self.m0).real)
        return min(t, self.dim - t)

    @property
    def light(self) -> np.ndarray:
        t = float(np.trace(self.m0).real)
        return self.m0 if t <= self.dim - t else self.m1

    @classmethod
    def projector(cls, d: int, rank: int) -> "TwoOutcomePovm":
        """M0 = projector onto the first ``rank`` computational basis states."""
        if not 0 <= rank <= d:
            raise ValueError(f"rank {rank} outside [0, {d}]")
        diag = np.zeros(d)
        diag[:rank] = 1.0
        return cls(np.diag(diag))


def povm_accept_prob(rho: DensityMatrix, povm: TwoOutcomePovm) -> float:
    """Tr(M rho) for the light effect M."""
    if rho.dim != povm.dim:
        raise ValueError(f"state has d={rho.dim}, POVM has d={povm.dim}")
    t = np.trace(povm.light @ rho.mat)
    if abs(t.imag) > POVM_TOL or t.real < -POVM_TOL or t.real > 1 + POVM_TOL:
        raise InvariantError(f"acceptance probability {t} not in [0, 1]")
    return float(min(max(t.real, 0.0), 1.0))
