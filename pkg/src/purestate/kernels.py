"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with identical semantics.  Randomness is
never drawn inside a kernel: callers pass pre-drawn uniforms, so both paths
produce bit-identical outputs for the same stream.

Set ``PURESTATE_NUMBA=0`` before import to force the numpy path.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

_FLAG = os.environ.get("PURESTATE_NUMBA", "1").strip().lower()
USE_NUMBA = numba is not None and _FLAG not in ("0", "false", "no", "off")
BACKEND = "numba" if USE_NUMBA else "numpy"


def _cdf_rows(probs):
    cdf = np.cumsum(probs, axis=-1)
    cdf /= cdf[..., -1:]
    cdf[..., -1] = 1.0
    return cdf


# -- numpy path --------------------------------------------------------------

def categorical_draws_np(probs, uniforms):
    """Inverse-CDF sampling, one probability row per row of ``uniforms``.

    ``probs`` is (B, d), ``uniforms`` is (B, m) in [0, 1).  Outcome is the
    number of CDF entries <= u, which lies in {0, ..., d-1}.
    """
    cdf = _cdf_rows(np.asarray(probs, dtype=np.float64))
    return (uniforms[:, :, None] >= cdf[:, None, :]).sum(axis=-1).astype(np.int64)


def collision_stats_np(outcomes, d):
    """Row-wise collision statistic sum_i count_i**2 / m**2 - 1/m."""
    b, m = outcomes.shape
    flat = outcomes + (np.arange(b, dtype=np.int64) * d)[:, None]
    counts = np.bincount(flat.ravel(), minlength=b * d).reshape(b, d)
    sq = (counts * counts).sum(axis=1)
    return sq / (m * m) - 1.0 / m


def collision_from_uniforms_np(probs, uniforms):
    d = probs.shape[-1]
    return collision_stats_np(categorical_draws_np(probs, uniforms), d)


def bernoulli_sums_np(p, uniforms):
    """Number of successes per row: u < p[row]."""
    return (uniforms < np.asarray(p, dtype=np.float64)[:, None]).sum(axis=1).astype(np.int64)


# -- numba path --------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def _categorical_draws_nb(cdf, uniforms):
        b, m = uniforms.shape
        d = cdf.shape[1]
        out = np.empty((b, m), dtype=np.int64)
        for r in range(b):
            for t in range(m):
                u = uniforms[r, t]
                idx = 0
                for i in range(d):
                    if u >= cdf[r, i]:
                        idx += 1
                out[r, t] = idx
        return out

    @numba.njit(cache=True, nogil=True)
    def _collision_stats_nb(outcomes, d):
        b, m = outcomes.shape
        out = np.empty(b, dtype=np.float64)
        counts = np.zeros(d, dtype=np.int64)
        for r in range(b):
            counts[:] = 0
            for t in range(m):
                counts[outcomes[r, t]] += 1
            sq = 0
            for i in range(d):
                sq += counts[i] * counts[i]
            out[r] = sq / (m * m) - 1.0 / m
        return out

    @numba.njit(cache=True, nogil=True)
    def _collision_from_uniforms_nb(cdf, uniforms):
        b, m = uniforms.shape
        d = cdf.shape[1]
        out = np.empty(b, dtype=np.float64)
        counts = np.zeros(d, dtype=np.int64)
        for r in range(b):
            counts[:] = 0
            for t in range(m):
                u = uniforms[r, t]
                idx = 0
                for i in range(d):
                    if u >= cdf[r, i]:
                        idx += 1
                counts[idx] += 1
            sq = 0
            for i in range(d):
                sq += counts[i] * counts[i]
            out[r] = sq / (m * m) - 1.0 / m
        return out

    @numba.njit(cache=True, nogil=True)
    def _bernoulli_sums_nb(p, uniforms):
        b, n = uniforms.shape
        out = np.zeros(b, dtype=np.int64)
        for r in range(b):
            s = 0
            for t in range(n):
                if uniforms[r, t] < p[r]:
                    s += 1
            out[r] = s
        return out

    def categorical_draws_nb(probs, uniforms):
        cdf = _cdf_rows(np.asarray(probs, dtype=np.float64))
        return _categorical_draws_nb(np.ascontiguousarray(cdf), np.ascontiguousarray(uniforms))

    def collision_stats_nb(outcomes, d):
        return _collision_stats_nb(np.ascontiguousarray(outcomes, dtype=np.int64), int(d))

    def collision_from_uniforms_nb(probs, uniforms):
        cdf = _cdf_rows(np.asarray(probs, dtype=np.float64))
        return _collision_from_uniforms_nb(np.ascontiguousarray(cdf), np.ascontiguousarray(uniforms))

    def bernoulli_sums_nb(p, uniforms):
        return _bernoulli_sums_nb(
            np.ascontiguousarray(p, dtype=np.float64), np.ascontiguousarray(uniforms)
        )


if USE_NUMBA:
    categorical_draws = categorical_draws_nb
    collision_stats = collision_stats_nb
    collision_from_uniforms = collision_from_uniforms_nb
    bernoulli_sums = bernoulli_sums_nb
else:
    categorical_draws = categorical_draws_np
    collision_stats = collision_stats_np
    collision_from_uniforms = collision_from_uniforms_np
    bernoulli_sums = bernoulli_sums_np
