"""Successive-rejects identification of the purest state.

Two drivers share one elimination engine: the incoherent driver scores
states with collision statistics in Haar-random bases, the coherent driver
with SWAP-test accept bits.  A uniform-allocation baseline and a Bernoulli
arm variant (used by the lower-bound lab) ride on the same pieces.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .measure import shared_support, swap_accept_probability
from .qcore import StateEnsemble, gap_profile_from_purities, haar_isometries, logbar

log = logging.getLogger(__name__)

IM = "IM"
CM = "CM"
# copies consumed per unit of evidence: one basis costs m copies (IM), one SWAP test 2 (CM)
_SWAP_COST = 2


@dataclass(frozen=True)
class BudgetSchedule:
    mode: str
    n_k: tuple
    logbar_k: float
    total_budget: int


def phase_budgets(n: int, k_arms: int, mode: str) -> BudgetSchedule:
    """Cumulative per-state budgets N_1 <= ... <= N_{K-1}.

    N_k = ceil(scale * (N - K) / (K + 1 - k)) with scale 1/logbar(K) (IM) or
    1/(2 logbar(K)) (CM), evaluated in exact rational arithmetic.
    """
    if k_arms < 2:
        raise ValueError("K must be >= 2")
    if n <= k_arms:
        raise ValueError(f"budget N={n} cannot cover one probe per arm (K={k_arms})")
    if mode not in (IM, CM):
        raise ValueError(f"mode must be 'IM' or 'CM', got {mode!r}")
    lb = logbar(k_arms)
    scale = 1 / lb if mode == IM else 1 / (2 * lb)
    n_k = tuple(
        math.ceil(scale * Fraction(n - k_arms, k_arms + 1 - k)) for k in range(1, k_arms)
    )
    return BudgetSchedule(mode, n_k, float(lb), n)


@dataclass(frozen=True)
class PhaseRecord:
    k: int
    survivors: tuple
    w: tuple
    eliminated: int
    units: int


@dataclass(frozen=True)
class RunTranscript:
    selected: int
    eliminations: tuple
    copies_consumed: int
    mode: str
    total_budget: int
    m: int | None = None
    seed: int | None = None
    strategy: str = "successive_rejects"

    def to_jsonl(self) -> str:
        head = {
            "record": "run", "strategy": self.strategy, "mode": self.mode,
            "N": self.total_budget, "m": self.m, "seed": self.seed,
        }
        lines = [json.dumps(head)]
        for r in self.eliminations:
            lines.append(json.dumps({
                "record": "phase", "k": r.k, "survivors": list(r.survivors),
                "w": list(r.w), "eliminated": r.eliminated, "units": r.units,
            }))
        lines.append(json.dumps({
            "record": "result", "selected": self.selected, "copies_consumed": self.copies_consumed,
        }))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "RunTranscript":
        recs = [json.loads(line) for line in text.splitlines() if line.strip()]
        head, phases, tail = recs[0], recs[1:-1], recs[-1]
        elim = tuple(
            PhaseRecord(p["k"], tuple(p["survivors"]), tuple(p["w"]), p["eliminated"], p["units"])
            for p in phases
        )
        return cls(
            selected=tail["selected"], eliminations=elim, copies_consumed=tail["copies_consumed"],
            mode=head["mode"], total_budget=head["N"], m=head["m"], seed=head["seed"],
            strategy=head["strategy"],
        )


def eliminate(w: Sequence[float], survivors: Sequence[int]) -> int:
    """Survivor with the smallest score; ties go to the lowest index."""
    order = np.lexsort((np.asarray(survivors), np.asarray(w, dtype=np.float64)))
    return int(np.asarray(survivors)[order[0]])


DrawFn = Callable[[np.ndarray, int, int], np.ndarray]


@dataclass
class _Engine:
    """Successive rejects over cumulative unit targets.

    ``draw(survivors, start, stop)`` returns, per survivor, the sum of the
    per-unit statistics for units ``start..stop-1``.  Scores are running
    means over every unit collected so far.
    """

    n_arms: int
    targets: Sequence[int]
    draw: DrawFn
    unit_cost: int
    budget: int
    strict: bool = False
    sums: np.ndarray = field(init=False)

    def run(self):
        self.sums = np.zeros(self.n_arms)
        survivors = np.arange(self.n_arms)
        done = 0
        consumed = 0
        records = []
        for k, target in enumerate(self.targets, start=1):
            new = max(target - done, 0)
            if self.strict:
                room = (self.budget - consumed) // (survivors.size * self.unit_cost)
                new = min(new, max(room, 0))
            if new > 0:
                self.sums[survivors] += self.draw(survivors, done, done + new)
                consumed += survivors.size * self.unit_cost * new
                done += new
            if done == 0:
                raise ValueError(f"phase {k} ends with no evidence collected; raise the budget")
            w = self.sums[survivors] / done
            loser = eliminate(w, survivors)
            records.append(PhaseRecord(k, tuple(int(s) for s in survivors),
                                       tuple(float(x) for x in w), loser, done))
            survivors = survivors[survivors != loser]
        overshoot = consumed - self.budget
        if overshoot > 0:
            log.debug("budget overshoot of %d copies (N=%d)", overshoot, self.budget)
        return int(survivors[0]), tuple(records), consumed


def _im_draw(support, isometries, m, rng) -> DrawFn:
    def draw(survivors, start, stop):
        ws = isometries[start:stop]
        out = np.empty(survivors.size)
        for pos, s in enumerate(survivors):
            probs = support.probabilities(s, ws)
            g = kernels.collision_from_uniforms(probs, rng.random((ws.shape[0], m)))
            out[pos] = g.sum()
        return out
    return draw


def _im_setup(ens: StateEnsemble, count: int, rng: np.random.Generator):
    """Shared support of the ensemble and ``count`` Haar bases restricted to it."""
    support = shared_support(ens.matrices())
    return support, haar_isometries(ens.dim, support.rank, count, rng)


def _bernoulli_draw(params, rng, flip=False) -> DrawFn:
    params = np.asarray(params, dtype=np.float64)

    def draw(survivors, start, stop):
        n = stop - start
        hits = kernels.bernoulli_sums(params[survivors], rng.random((survivors.size, n)))
        return (n - hits if flip else hits).astype(np.float64)
    return draw


def _check_m(m):
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")


def run_im_pqsi(ens: StateEnsemble, n: int, m: int, rng: np.random.Generator, *,
                seed: int | None = None, strict_budget: bool = False) -> RunTranscript:
    """Incoherent identification with collision statistics in shared Haar bases."""
    _check_m(m)
    sched = phase_budgets(n, ens.size, IM)
    targets = [nk // m for nk in sched.n_k]
    if targets[0] < 1:
        raise ValueError(f"N={n} leaves no full basis of m={m} copies in phase 1")
    support, ws = _im_setup(ens, n // m, rng)
    eng = _Engine(ens.size, targets, _im_draw(support, ws, m, rng), m, n, strict_budget)
    selected, records, consumed = eng.run()
    return RunTranscript(selected, records, consumed, IM, n, m, seed)


def run_cm_pqsi(ens: StateEnsemble, n: int, rng: np.random.Generator, *,
                seed: int | None = None, strict_budget: bool = False) -> RunTranscript:
    """Coherent identification with two-copy SWAP tests."""
    if n <= _SWAP_COST * ens.size:
        raise ValueError(f"N={n} must exceed 2K={_SWAP_COST * ens.size}")
    sched = phase_budgets(n, ens.size, CM)
    p = [swap_accept_probability(z) for z in ens.purities]
    eng = _Engine(ens.size, list(sched.n_k), _bernoulli_draw(p, rng), _SWAP_COST, n, strict_budget)
    selected, records, consumed = eng.run()
    return RunTranscript(selected, records, consumed, CM, n, None, seed)


def _select_all_at_once(w: np.ndarray, units: int):
    survivors = np.arange(w.size)
    records = []
    while survivors.size > 1:
        loser = eliminate(w[survivors], survivors)
        records.append(PhaseRecord(len(records) + 1, tuple(int(s) for s in survivors),
                                   tuple(float(x) for x in w[survivors]), loser, units))
        survivors = survivors[survivors != loser]
    return int(survivors[0]), tuple(records)


def run_uniform_baseline(ens: StateEnsemble, n: int, mode: str, m: int | None,
                         rng: np.random.Generator, *, seed: int | None = None) -> RunTranscript:
    """Equal split of the budget, one final ranking.

    The winner is found by eliminating argmin scores with the same tie rule as
    successive rejects, so a tie at the top goes to the higher index.
    """
    k = ens.size
    idx = np.arange(k)
    if mode == IM:
        _check_m(m)
        units = n // (k * m)
        if units < 1:
            raise ValueError(f"N={n} leaves no full basis per state")
        draw = _im_draw(*_im_setup(ens, units, rng), m, rng)
        cost = m
    elif mode == CM:
        units = n // (_SWAP_COST * k)
        if units < 1:
            raise ValueError(f"N={n} leaves no SWAP test per state")
        draw = _bernoulli_draw([swap_accept_probability(z) for z in ens.purities], rng)
        cost = _SWAP_COST
        m = None
    else:
        raise ValueError(f"mode must be 'IM' or 'CM', got {mode!r}")
    w = draw(idx, 0, units) / units
    selected, records = _select_all_at_once(w, units)
    return RunTranscript(selected, records, k * units * cost, mode, n, m, seed, "uniform")


def run_bernoulli_arms(params: Sequence[float], n: int, rng: np.random.Generator, *,
                       allocator: str = "successive_rejects", maximize: bool = True):
    """Classical fixed-budget identification over Bernoulli arms, one copy per pull.

    Successive rejects uses the incoherent schedule.  With ``maximize=False``
    the arm with the smallest parameter is sought.
    """
    k = len(params)
    draw = _bernoulli_draw(params, rng, flip=not maximize)
    if allocator == "successive_rejects":
        sched = phase_budgets(n, k, IM)
        selected, records, consumed = _Engine(k, list(sched.n_k), draw, 1, n).run()
    elif allocator == "uniform":
        units = n // k
        if units < 1:
            raise ValueError(f"N={n} leaves no pull per arm")
        selected, records = _select_all_at_once(draw(np.arange(k), 0, units) / units, units)
        consumed = units * k
    else:
        raise ValueError(f"unknown allocator {allocator!r}")
    return RunTranscript(selected, records, consumed, "BERNOULLI", n, 1, None, allocator)


# -- m policies --------------------------------------------------------------

def m_from_gap(c: float) -> int:
    """ceil(1/sqrt(c)), floored at 2."""
    if not 0 < c <= 1:
        raise ValueError(f"gap c must lie in (0, 1], got {c}")
    m = math.ceil(1.0 / math.sqrt(c))
    if m < 2:
        log.info("m=ceil(1/sqrt(c))=%d raised to the floor m=2", m)
    return max(m, 2)


def m_equal_d(d: int) -> int:
    return max(int(d), 2)


# -- theory ------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentReport:
    """Exponent arguments of the error bounds.

    The incoherent entries are Omega-arguments whose hidden constant is set
    to 1 (``unconstanted``); only ``cm_envelope`` is a full bound.
    """

    im_exponent: float
    im_m_equal_d_exponent: float
    cm_exponent: float
    cm_envelope: float
    h1: float
    h2: float
    logbar_k: float
    d: int
    n: int
    unconstanted: tuple = ("im_exponent", "im_m_equal_d_exponent")


def exponents_from_purities(purities: Sequence[float], d: int, n: int) -> ExponentReport:
    gp = gap_profile_from_purities(purities)
    k = len(purities)
    im = n * gp.h1 / (gp.logbar_k * d)
    cm = n * gp.h2 / gp.logbar_k
    im_d = min(cm, n * gp.h1 / (gp.logbar_k * d * d))
    env = k * (k - 1) / 2 * math.exp(-n * gp.h2 / (8 * gp.logbar_k))
    return ExponentReport(im, im_d, cm, env, gp.h1, gp.h2, gp.logbar_k, d, n)


def theoretical_exponents(ens: StateEnsemble, n: int) -> ExponentReport:
    return exponents_from_purities(ens.purities, ens.dim, n)
