"""Pool-adjacent-violators solver for the weighted monotone cone.

The kernel is the inner loop of every simulation step, so it is compiled
with numba when available; the pure-Python implementation is identical and
used as a fallback.  Two guarantees the rest of the package leans on:

* pooling happens only on strict descents, so a non-decreasing input comes
  back bit-for-bit unchanged and adjacent equal inputs never end up with
  different outputs;
* each pooled block is assigned a single shared float (its weighted mean,
  computed from running sums), so downstream exact-equality cluster
  detection sees pooled cells as one cluster.
"""

from __future__ import annotations

import numpy as np

__all__ = ["pava", "pava_blocks", "HAVE_NUMBA"]


def _pava_blocks_impl(y, w):
    n = y.shape[0]
    # Per stack block: weighted value sum, weight sum, length, current mean.
    xsum = np.empty(n)
    wsum = np.empty(n)
    lens = np.empty(n, np.int64)
    vals = np.empty(n)
    top = -1
    merges = 0
    for i in range(n):
        top += 1
        xsum[top] = y[i] * w[i]
        wsum[top] = w[i]
        lens[top] = 1
        vals[top] = y[i]
        while top > 0 and vals[top - 1] > vals[top]:
            xsum[top - 1] += xsum[top]
            wsum[top - 1] += wsum[top]
            lens[top - 1] += lens[top]
            vals[top - 1] = xsum[top - 1] / wsum[top - 1]
            top -= 1
            merges += 1
    return vals[: top + 1].copy(), lens[: top + 1].copy(), merges


try:  # pragma: no cover - exercised indirectly
    from numba import njit

    _pava_blocks_fast = njit(cache=True)(_pava_blocks_impl)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _pava_blocks_fast = _pava_blocks_impl
    HAVE_NUMBA = False


def pava_blocks(y: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Pooled representation: (block values, block lengths, merge count).

    Consecutive blocks satisfy vals[k] <= vals[k+1]; equality is possible
    (equal inputs are not pooled).  ``merges`` counts pooling events, each
    of which reduced the block count by one.
    """
    return _pava_blocks_fast(y, w)


def pava(y: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, int]:
    """Isotonic fit expanded to full length, plus the merge count."""
    vals, lens, merges = _pava_blocks_fast(y, w)
    return np.repeat(vals, lens), merges
