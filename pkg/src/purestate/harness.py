"""Seeded Monte Carlo sweeps with deterministic CSV output.

Every trial draws from its own Philox stream keyed by
``(master_seed, cell_index, trial_index)``, so results do not depend on the
worker count, and growing ``trials_per_cell`` keeps earlier trials intact.
"""
from __future__ import annotations

import csv
import io
import json
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path
from statistics import NormalDist

import numpy as np

from . import identify, lowerbound
from .measure import TwoOutcomePovm
from .qcore import (
    EnsembleSpec,
    PRESETS,
    StateEnsemble,
    load_ensemble,
    make_ensemble,
    verify_haar_moments,
)

SCHEMA_VERSION = 1
COLUMNS = (
    "experiment", "d", "K", "N", "m", "trials", "successes", "empirical_error",
    "wilson_low", "wilson_high", "theory_value", "theory_kind", "mean_copies", "seed",
)
EXPERIMENTS = ("im_sweep", "cm_sweep", "baseline_sweep", "lowerbound_sweep", "moment_check",
               "concentration")

# stream namespaces under one cell
_TRIAL, _ENSEMBLE, _CELL = 0, 1, 2


class ConfigError(ValueError):
    pass


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for one (seed, key...) address."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def trial_stream(master_seed: int, cell: int, trial: int) -> np.random.Generator:
    return stream(master_seed, cell, _TRIAL, trial)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    low = 0.0 if successes == 0 else max(0.0, centre - half)
    high = 1.0 if successes == trials else min(1.0, centre + half)
    return float(low), float(high)


# -- config ------------------------------------------------------------------

_M_POLICY = re.compile(r"^(fixed\((\d+)\)|sqrt_c\(([0-9.eE+-]+)\)|equal_d)$")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    dims: tuple = (2,)
    budgets: tuple = (100,)
    purities: tuple | None = None
    preset: str | None = None
    ensemble_path: str | None = None
    rotation: str = "shared"
    m_policy: str = "equal_d"
    trials_per_cell: int = 100
    master_seed: int = 0
    output_path: str | None = None
    strict_budget: bool = False
    workers: int = 1
    baseline_mode: str = "CM"
    allocator: str = "successive_rejects"
    povm_rank: int | None = None
    alpha: float = 0.3

    def __post_init__(self):
        problems = []
        if self.experiment not in EXPERIMENTS:
            problems.append(f"experiment: {self.experiment!r} not in {EXPERIMENTS}")
        if not self.dims or any(int(d) < 2 for d in self.dims):
            problems.append("dims: need a non-empty list of integers >= 2")
        if not self.budgets or any(b <= a for a, b in zip(self.budgets, self.budgets[1:])):
            problems.append("budgets: need a strictly increasing non-empty list")
        if self.trials_per_cell < 1:
            problems.append("trials_per_cell: must be >= 1")
        if self.preset is not None and self.preset not in PRESETS:
            problems.append(f"preset: unknown preset {self.preset!r}")
        if not _M_POLICY.match(self.m_policy):
            problems.append(f"m_policy: {self.m_policy!r} is not fixed(M), sqrt_c(C) or equal_d")
        if self.baseline_mode not in (identify.IM, identify.CM):
            problems.append("baseline_mode: must be IM or CM")
        if self.allocator not in ("successive_rejects", "uniform"):
            problems.append("allocator: must be successive_rejects or uniform")
        if self.workers < 1:
            problems.append("workers: must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            problems.append("alpha: must lie in [0, 1]")
        needs_states = self.experiment not in ("moment_check", "concentration")
        sources = sum(x is not None for x in (self.purities, self.preset, self.ensemble_path))
        if needs_states and sources != 1:
            problems.append("purities/preset/ensemble_path: give exactly one ensemble source")
        if self.experiment == "lowerbound_sweep" and self.purities is None:
            problems.append("purities: lowerbound_sweep needs an explicit purity list")
        if problems:
            raise ConfigError("; ".join(problems))

    def m_for(self, d: int) -> int:
        mt = _M_POLICY.match(self.m_policy)
        if mt.group(2):
            return int(mt.group(2))
        if mt.group(3):
            return identify.m_from_gap(float(mt.group(3)))
        return identify.m_equal_d(d)


_FIELD_TYPES = {
    "experiment": str, "dims": "ints", "budgets": "ints", "purities": "floats", "preset": str,
    "ensemble_path": str, "rotation": str, "m_policy": str, "trials_per_cell": int,
    "master_seed": int, "output_path": str, "strict_budget": bool, "workers": int,
    "baseline_mode": str, "allocator": str, "povm_rank": int, "alpha": float,
}


def _coerce(key, raw):
    kind = _FIELD_TYPES[key]
    try:
        if kind in ("ints", "floats"):
            val = json.loads(raw)
            if not isinstance(val, list):
                val = [val]
            cast = int if kind == "ints" else float
            if kind == "ints" and any(float(v) != int(v) for v in val):
                raise ValueError("non-integer entry")
            return tuple(cast(v) for v in val)
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError("expected true/false")
            return low in ("true", "1", "yes")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw.strip().strip('"').strip("'")
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None


def parse_config(text: str) -> ExperimentConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment; lists are JSON."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{key}: unknown key (line {lineno})")
        values[key] = _coerce(key, raw)
    if "experiment" not in values:
        raise ConfigError("experiment: required key missing")
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path} ({exc})") from None
    return parse_config(text)


# -- cells -------------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    index: int
    d: int
    n: int


@dataclass
class SweepRow:
    experiment: str
    d: int
    k: int
    n: int
    m: int | None
    trials: int
    successes: int
    empirical_error: float
    wilson_low: float
    wilson_high: float
    theory_value: float
    theory_kind: str
    mean_copies: float
    seed: int
    wallclock_ms: float = 0.0

    def csv_values(self) -> list:
        g = lambda x: format(float(x), ".17g")  # noqa: E731
        return [
            self.experiment, self.d, self.k, self.n, "" if self.m is None else self.m, self.trials,
            self.successes, g(self.empirical_error), g(self.wilson_low), g(self.wilson_high),
            g(self.theory_value), self.theory_kind, g(self.mean_copies), self.seed,
        ]


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema_version={SCHEMA_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_values())
        return buf.getvalue()

    def timing_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("experiment", "d", "N", "wallclock_ms"))
        for r in self.rows:
            w.writerow((r.experiment, r.d, r.n, f"{r.wallclock_ms:.3f}"))
        return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def cells(cfg: ExperimentConfig) -> list[Cell]:
    if cfg.experiment in ("moment_check", "concentration"):
        return [Cell(i, int(d), 0) for i, d in enumerate(cfg.dims)]
    return [Cell(i, int(d), int(n)) for i, (d, n) in enumerate(product(cfg.dims, cfg.budgets))]


def cell_ensemble(cfg: ExperimentConfig, cell: Cell) -> StateEnsemble:
    if cfg.ensemble_path is not None:
        ens = load_ensemble(cfg.ensemble_path)
        if ens.dim != cell.d:
            raise ConfigError(f"dims: ensemble file has d={ens.dim}, cell asks for d={cell.d}")
        return ens
    spec = EnsembleSpec(purities=cfg.purities, d=cell.d, rotation=cfg.rotation, preset=cfg.preset)
    return make_ensemble(spec, stream(cfg.master_seed, cell.index, _ENSEMBLE))


def _povm_for(cfg, d) -> TwoOutcomePovm:
    rank = cfg.povm_rank if cfg.povm_rank is not None else d // 2
    return TwoOutcomePovm.projector(d, rank)


def _theory(cfg, ens_purities, d, n, m):
    rep = identify.exponents_from_purities(ens_purities, d, n)
    exp = cfg.experiment
    mode = cfg.baseline_mode if exp == "baseline_sweep" else None
    if exp == "cm_sweep" or mode == identify.CM:
        return rep.cm_envelope, "cm_envelope"
    if exp == "lowerbound_sweep":
        return n * rep.h1 / d, "lb_exponent_unconstanted"
    if m == d:
        return rep.im_m_equal_d_exponent, "im_m_equal_d_exponent_unconstanted"
    return rep.im_exponent, "im_exponent_unconstanted"


def run_trial(cfg: ExperimentConfig, ens, cell: Cell, m, trial: int):
    """One seeded trial; returns (correct, copies_consumed)."""
    rng = trial_stream(cfg.master_seed, cell.index, trial)
    exp = cfg.experiment
    if exp == "im_sweep":
        t = identify.run_im_pqsi(ens, cell.n, m, rng, seed=cfg.master_seed,
                                 strict_budget=cfg.strict_budget)
    elif exp == "cm_sweep":
        t = identify.run_cm_pqsi(ens, cell.n, rng, seed=cfg.master_seed,
                                 strict_budget=cfg.strict_budget)
    elif exp == "baseline_sweep":
        t = identify.run_uniform_baseline(ens, cell.n, cfg.baseline_mode, m, rng,
                                          seed=cfg.master_seed)
    elif exp == "lowerbound_sweep":
        inst = lowerbound.random_instance(cfg.purities, cell.d, rng)
        sel = lowerbound.fixed_povm_bandit_trial(inst, _povm_for(cfg, cell.d), cell.n,
                                                 cfg.allocator, rng)
        return sel == inst.best_index, cell.n
    else:
        raise ValueError(f"{exp} has no per-trial runner")
    return t.selected == ens.best_index, t.copies_consumed


def _run_chunk(args):
    cfg, ens, cell, m, lo, hi = args
    return [run_trial(cfg, ens, cell, m, t) for t in range(lo, hi)]


def _row(cfg, cell, k, m, trials, successes, theory, copies, started):
    errors = trials - successes
    lo, hi = wilson_interval(errors, trials)
    return SweepRow(cfg.experiment, cell.d, k, cell.n, m, trials, successes, errors / trials,
                    lo, hi, theory[0], theory[1], copies, cfg.master_seed,
                    (time.perf_counter() - started) * 1e3)


def _bandit_cell(cfg, cell, pool):
    started = time.perf_counter()
    if cfg.experiment == "lowerbound_sweep":
        ens, zs = None, list(cfg.purities)
        m = 1
    else:
        ens = cell_ensemble(cfg, cell)
        zs = list(ens.purities)
        m = None if _mode(cfg) == identify.CM else cfg.m_for(cell.d)
    n = cfg.trials_per_cell
    if pool is None:
        outcomes = _run_chunk((cfg, ens, cell, m, 0, n))
    else:
        step = max(1, -(-n // (4 * cfg.workers)))
        jobs = [(cfg, ens, cell, m, lo, min(lo + step, n)) for lo in range(0, n, step)]
        outcomes = [o for chunk in pool.map(_run_chunk, jobs) for o in chunk]
    successes = sum(bool(ok) for ok, _ in outcomes)
    copies = float(np.mean([c for _, c in outcomes]))
    return _row(cfg, cell, len(zs), m, n, successes, _theory(cfg, zs, cell.d, cell.n, m or 1),
                copies, started)


def _mode(cfg):
    if cfg.experiment == "cm_sweep":
        return identify.CM
    if cfg.experiment == "baseline_sweep":
        return cfg.baseline_mode
    return identify.IM


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2.0


def _moment_cell(cfg, cell):
    started = time.perf_counter()
    rng = stream(cfg.master_seed, cell.index, _CELL)
    a, b, c = (random_hermitian(cell.d, rng) for _ in range(3))
    rep = verify_haar_moments(a, b, c, cfg.trials_per_cell, rng)
    passed = sum(z <= 4.0 for z in rep.z_scores())
    row = _row(cfg, replace(cell, n=cfg.trials_per_cell), 3, None, 3, passed, (4.0, "z_threshold"),
               0.0, started)
    return row


def _concentration_cell(cfg, cell):
    started = time.perf_counter()
    rng = stream(cfg.master_seed, cell.index, _CELL)
    povm = _povm_for(cfg, cell.d)
    trials = max(cfg.trials_per_cell, 100)
    rep = lowerbound.concentration_experiment(povm, cfg.alpha, trials, rng)
    inside = int(round(rep.in_window_fraction * trials))
    return _row(cfg, replace(cell, n=int(round(povm.trace_m))), 1, None, trials, inside,
                (0.25, "chebyshev_max_out_of_window"), 0.0, started)


def run_sweep(cfg: ExperimentConfig, *, write: bool = True) -> SweepResult:
    """Run every (d, N) cell and, if ``output_path`` is set, write the CSV.

    Timings go to ``<output_path>.timing.csv`` so the result file stays a
    pure function of the config.
    """
    result = SweepResult()
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for cell in cells(cfg):
            if cfg.experiment == "moment_check":
                result.rows.append(_moment_cell(cfg, cell))
            elif cfg.experiment == "concentration":
                result.rows.append(_concentration_cell(cfg, cell))
            else:
                result.rows.append(_bandit_cell(cfg, cell, pool))
    finally:
        if pool is not None:
            pool.shutdown()
    if write and cfg.output_path:
        out = Path(cfg.output_path)
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(result.to_csv())
            Path(str(out) + ".timing.csv").write_text(result.timing_csv())
        except OSError as exc:
            raise ConfigError(f"output_path: cannot write {out} ({exc})") from None
    return result


def simulate(cfg: ExperimentConfig, trial: int = 0):
    """Single trial of the first cell; transcripts for identification runs."""
    cell = cells(cfg)[0]
    if cfg.experiment in ("im_sweep", "cm_sweep", "baseline_sweep"):
        ens = cell_ensemble(cfg, cell)
        rng = trial_stream(cfg.master_seed, cell.index, trial)
        m = cfg.m_for(cell.d)
        if cfg.experiment == "im_sweep":
            return identify.run_im_pqsi(ens, cell.n, m, rng, seed=cfg.master_seed,
                                        strict_budget=cfg.strict_budget)
        if cfg.experiment == "cm_sweep":
            return identify.run_cm_pqsi(ens, cell.n, rng, seed=cfg.master_seed,
                                        strict_budget=cfg.strict_budget)
        return identify.run_uniform_baseline(ens, cell.n, cfg.baseline_mode, m, rng,
                                             seed=cfg.master_seed)
    one = replace(cfg, dims=(cell.d,), budgets=cfg.budgets[:1],
                  trials_per_cell=cfg.trials_per_cell if cfg.experiment != "lowerbound_sweep" else 1)
    return run_sweep(one, write=False)

