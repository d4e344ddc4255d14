"""Density matrices, unitaries, Haar sampling and gap arithmetic."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
UNITARY_TOL = 1e-9
PURITY_TOL = 1e-10
TIE_MARGIN = 1e-9


class InvariantError(ValueError):
    """Raised when a matrix or ensemble violates its construction contract."""


def _square(mat, name="matrix") -> np.ndarray:
    a = np.array(mat, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvariantError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 2:
        raise InvariantError(f"{name} dimension must be >= 2, got {a.shape[0]}")
    a.setflags(write=False)
    return a


def is_hermitian(mat, tol: float = HERM_TOL) -> bool:
    mat = np.asarray(mat)
    return bool(np.max(np.abs(mat - mat.conj().T)) <= tol)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    mat: np.ndarray

    def __post_init__(self):
        a = _square(self.mat, "density matrix")
        if not is_hermitian(a):
            raise InvariantError("density matrix is not Hermitian")
        if abs(np.trace(a) - 1.0) > TRACE_TOL:
            raise InvariantError(f"density matrix trace is {np.trace(a).real:.3g}, not 1")
        lam = np.linalg.eigvalsh(a)
        if lam[0] < -PSD_TOL:
            raise InvariantError(f"density matrix has eigenvalue {lam[0]:.3g} < 0")
        object.__setattr__(self, "mat", a)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    mat: np.ndarray

    def __post_init__(self):
        a = _square(self.mat, "unitary")
        err = np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0])))
        if err > UNITARY_TOL:
            raise InvariantError(f"matrix is not unitary (residual {err:.3g})")
        object.__setattr__(self, "mat", a)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def identity(cls, d: int) -> "UnitaryMatrix":
        return cls(np.eye(d))


def purity(rho: DensityMatrix) -> float:
    """Tr(rho^2), computed as the squared Frobenius norm."""
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    return float(np.sum(np.abs(rho.mat) ** 2))


def purity_by_product(rho: DensityMatrix) -> float:
    """Tr(rho @ rho) via the explicit matrix product (cross-check route)."""
    t = np.trace(rho.mat @ rho.mat)
    if abs(t.imag) > 1e-12:
        raise InvariantError(f"purity has imaginary residue {t.imag:.3g}")
    return float(t.real)


# -- Haar sampling -----------------------------------------------------------

_HAAR_CHUNK_ELEMS = 1 << 22


def _haar_block(d: int, r: int, count: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((count, d, r)) + 1j * rng.standard_normal((count, d, r))) / np.sqrt(2.0)
    q, rr = np.linalg.qr(z)
    diag = np.diagonal(rr, axis1=1, axis2=2)
    mag = np.abs(diag)
    bad = np.any(mag < 1e-300, axis=1)
    if np.any(bad):
        q[bad] = _haar_block(d, r, int(bad.sum()), rng)
        diag = np.where(bad[:, None], 1.0, diag)
        mag = np.where(bad[:, None], 1.0, mag)
    # Q R = (Q L)(L^-1 R) with L = diag(R)/|diag(R)| leaves R with a positive diagonal
    return q * (diag / mag)[:, None, :]


def haar_isometries(d: int, r: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """First ``r`` columns of ``count`` Haar unitaries, shape (count, d, r).

    Drawn from a d x r Ginibre block, which has the same law as slicing a
    full Haar unitary; ``r == d`` gives full unitaries.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if not 0 <= r <= d:
        raise ValueError(f"r must lie in [0, {d}], got {r}")
    if count == 0 or r == 0:
        return np.empty((count, d, r), dtype=np.complex128)
    step = max(1, _HAAR_CHUNK_ELEMS // (d * r))
    blocks = [_haar_block(d, r, min(step, count - s), rng) for s in range(0, count, step)]
    return blocks[0] if len(blocks) == 1 else np.concatenate(blocks)


def haar_unitaries(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Stack of ``count`` Haar unitaries, shape (count, d, d)."""
    return haar_isometries(d, d, count, rng)


def sample_haar_unitary(d: int, rng: np.random.Generator) -> UnitaryMatrix:
    """One Haar-random unitary from a Ginibre draw and a phase-fixed QR."""
    return UnitaryMatrix(haar_unitaries(d, 1, rng)[0])


# -- depolarized pure states -------------------------------------------------

def alpha_from_purity(z: float, d: int) -> float:
    """Depolarizing weight whose depolarized pure state has purity ``z``."""
    if d < 2:
        raise ValueError("d must be >= 2")
    if z < 1.0 / d - PURITY_TOL or z > 1.0 + PURITY_TOL:
        raise ValueError(f"purity {z} outside [1/d, 1] for d={d}")
    return float(np.sqrt(min(max((d * z - 1.0) / (d - 1.0), 0.0), 1.0)))


def purity_from_alpha(alpha: float, d: int) -> float:
    return (1.0 + (d - 1.0) * alpha * alpha) / d


def depolarized_state(u: UnitaryMatrix, alpha: float, d: int) -> DensityMatrix:
    """alpha * U|0><0|U^dag + (1 - alpha)/d * I."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    umat = u.mat if isinstance(u, UnitaryMatrix) else np.asarray(u)
    if umat.shape != (d, d):
        raise ValueError(f"unitary has shape {umat.shape}, expected ({d}, {d})")
    psi = umat[:, 0]
    rho = alpha * np.outer(psi, psi.conj()) + (1.0 - alpha) / d * np.eye(d)
    return DensityMatrix(0.5 * (rho + rho.conj().T))


# -- ensembles ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StateEnsemble:
    states: tuple
    purities: tuple = field(init=False)
    best_index: int = field(init=False)

    def __post_init__(self):
        states = tuple(s if isinstance(s, DensityMatrix) else DensityMatrix(s) for s in self.states)
        if len(states) < 2:
            raise InvariantError("an ensemble needs at least two states")
        dims = {s.dim for s in states}
        if len(dims) != 1:
            raise InvariantError(f"states have mixed dimensions {sorted(dims)}")
        pur = tuple(purity(s) for s in states)
        order = np.argsort(pur)[::-1]
        if pur[order[0]] - pur[order[1]] < TIE_MARGIN:
            raise InvariantError(
                f"top two purities {pur[order[0]]:.12g} and {pur[order[1]]:.12g} are tied"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "purities", pur)
        object.__setattr__(self, "best_index", int(order[0]))

    @property
    def dim(self) -> int:
        return self.states[0].dim

    @property
    def size(self) -> int:
        return len(self.states)

    def matrices(self) -> np.ndarray:
        return np.stack([s.mat for s in self.states])


PRESETS = {
    "two-arm": {"purities": [1.0, 0.5], "d": 2},
    "geometric-gaps": {"purities": [0.95, 0.9, 0.8, 0.6], "d": 4},
}


@dataclass(frozen=True)
class EnsembleSpec:
    """How to build an ensemble: purity list, a file, or a named preset.

    ``rotation`` is ``"none"`` (diagonal states), ``"shared"`` (one Haar U
    for all states) or ``"independent"`` (one Haar U per state).
    """

    purities: Sequence[float] | None = None
    d: int | None = None
    rotation: str = "shared"
    path: str | None = None
    preset: str | None = None


def _from_purities(zs, d, rotation, rng) -> StateEnsemble:
    if rotation not in ("none", "shared", "independent"):
        raise ValueError(f"unknown rotation mode {rotation!r}")
    if rotation != "none" and rng is None:
        raise ValueError(f"rotation={rotation!r} needs a random stream")
    if rotation == "none":
        us = [UnitaryMatrix.identity(d)] * len(zs)
    elif rotation == "shared":
        us = [sample_haar_unitary(d, rng)] * len(zs)
    else:
        us = [sample_haar_unitary(d, rng) for _ in zs]
    return StateEnsemble(tuple(depolarized_state(u, alpha_from_purity(z, d), d) for z, u in zip(zs, us)))


def make_ensemble(spec: EnsembleSpec, rng: np.random.Generator | None = None) -> StateEnsemble:
    if spec.preset is not None:
        if spec.preset not in PRESETS:
            raise KeyError(f"unknown preset {spec.preset!r}; known: {sorted(PRESETS)}")
        p = PRESETS[spec.preset]
        d = spec.d if spec.d is not None else p["d"]
        return _from_purities(p["purities"], d, spec.rotation, rng)
    if spec.path is not None:
        return load_ensemble(spec.path)
    if spec.purities is None or spec.d is None:
        raise ValueError("ensemble spec needs purities and d, a path, or a preset")
    return _from_purities(list(spec.purities), int(spec.d), spec.rotation, rng)


# -- gaps --------------------------------------------------------------------

def logbar(k: int) -> Fraction:
    """1/2 + sum_{i=2}^{k} 1/i, exact."""
    if k < 2:
        raise ValueError("K must be >= 2")
    return Fraction(1, 2) + sum((Fraction(1, i) for i in range(2, k + 1)), Fraction(0))


@dataclass(frozen=True)
class GapProfile:
    deltas_sorted: tuple
    h1: float
    h2: float
    logbar_k: float


def gap_profile_from_purities(purities: Sequence[float]) -> GapProfile:
    z = sorted(purities, reverse=True)
    deltas = tuple(z[0] - zi for zi in z[1:])
    # position i in {2..K} pairs with deltas[i - 2]
    h1 = min(dl / i for i, dl in enumerate(deltas, start=2))
    h2 = min(dl * dl / i for i, dl in enumerate(deltas, start=2))
    return GapProfile(deltas, h1, h2, float(logbar(len(z))))


def gap_profile(ens: StateEnsemble) -> GapProfile:
    return gap_profile_from_purities(ens.purities)


# -- Haar moment check -------------------------------------------------------

@dataclass(frozen=True)
class MomentReport:
    estimates: tuple
    targets: tuple
    std_errors: tuple

    def z_scores(self) -> tuple:
        return tuple(
            0.0 if se == 0 and e == t else (np.inf if se == 0 else abs(e - t) / se)
            for e, t, se in zip(self.estimates, self.targets, self.std_errors)
        )


def haar_moment_targets(a, b, c) -> tuple:
    """Closed-form E<A>, E<A><B>, E<A><B><C> over Haar-random pure states.

    The third moment sums Tr over all six permutations of (A, B, C); the two
    3-cycles Tr(ABC) and Tr(ACB) are complex conjugates for Hermitian inputs,
    hence the 2 Re Tr(ABC) term.
    """
    d = a.shape[0]
    tr = lambda x: np.trace(x).real  # noqa: E731
    first = tr(a) / d
    second = (tr(a) * tr(b) + tr(a @ b)) / (d * (d + 1))
    third = (
        tr(a) * tr(b) * tr(c)
        + tr(a @ b) * tr(c)
        + tr(a) * tr(b @ c)
        + tr(c @ a) * tr(b)
        + 2.0 * tr(a @ b @ c)
    ) / (d * (d + 1) * (d + 2))
    return float(first), float(second), float(third)


def verify_haar_moments(a, b, c, nsamples: int, rng: np.random.Generator) -> MomentReport:
    """Monte Carlo estimates of the first three Haar moments with standard errors.

    The pure states are |psi> = U|0> for Haar-random U.
    """
    mats = [_square(x, n) for x, n in ((a, "A"), (b, "B"), (c, "C"))]
    if len({m.shape for m in mats}) != 1:
        raise ValueError("A, B, C must share a dimension")
    for m, n in zip(mats, "ABC"):
        if not is_hermitian(m):
            raise ValueError(f"{n} is not Hermitian")
    a, b, c = mats
    psi = haar_isometries(a.shape[0], 1, nsamples, rng)[:, :, 0]
    ea, eb, ec = (np.einsum("si,ij,sj->s", psi.conj(), m, psi).real for m in (a, b, c))
    samples = (ea, ea * eb, ea * eb * ec)
    est = tuple(float(s.mean()) for s in samples)
    se = tuple(float(s.std(ddof=1) / np.sqrt(nsamples)) for s in samples)
    return MomentReport(est, haar_moment_targets(a, b, c), se)


# -- ensemble file format ----------------------------------------------------
# <stem>.bin holds K row-major d x d matrices as little-endian float64
# (re, im) pairs; <stem>.json holds {"d": d, "K": K}.

def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    return p.with_suffix(".bin"), p.with_suffix(".json")


def save_ensemble(path, ens: StateEnsemble) -> None:
    data, header = _paths(path)
    arr = np.ascontiguousarray(ens.matrices(), dtype="<c16")
    data.write_bytes(arr.view("<f8").tobytes())
    header.write_text(json.dumps({"d": ens.dim, "K": ens.size}, sort_keys=True) + "\n")


def load_ensemble(path) -> StateEnsemble:
    data, header = _paths(path)
    meta = json.loads(header.read_text())
    d, k = int(meta["d"]), int(meta["K"])
    raw = np.frombuffer(data.read_bytes(), dtype="<f8")
    if raw.size != 2 * k * d * d:
        raise InvariantError(f"{data} holds {raw.size} doubles, expected {2 * k * d * d}")
    mats = raw.view("<c16").reshape(k, d, d).astype(np.complex128)
    return StateEnsemble(tuple(DensityMatrix(m) for m in mats))
