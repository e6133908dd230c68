"""Hot numeric kernels used by the recommender.

Two interchangeable backends exist for every kernel: a numba ``@njit`` loop
and a vectorised numpy expression.  Numba is used when it imports cleanly
and ``CONVOSIM_NUMBA`` is not set to ``0``.  Both backends must return
bit-identical results; ``tests/test_kernels.py`` checks this.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - import guard
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("CONVOSIM_NUMBA", "1") != "0"


# --------------------------------------------------------------------------
# numpy backend
# --------------------------------------------------------------------------

def item_scores_numpy(indptr: np.ndarray, indices: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Mean of ``weights`` over each CSR row's feature indices."""
    n_rows = indptr.shape[0] - 1
    lengths = np.diff(indptr)
    out = np.zeros(n_rows, dtype=np.float64)
    if indices.shape[0] == 0:
        return out
    # Accumulate column by column over a zero-padded matrix so each row is
    # summed left to right, in the same order as the numba loop.
    width = int(lengths.max())
    starts = indptr[:-1]
    sums = np.zeros(n_rows, dtype=np.float64)
    for j in range(width):
        live = lengths > j
        sums[live] += weights[indices[starts[live] + j]]
    nonempty = lengths > 0
    out[nonempty] = sums[nonempty] / lengths[nonempty]
    return out


def feature_counts_numpy(
    indptr: np.ndarray, indices: np.ndarray, rows: np.ndarray, n_features: int
) -> np.ndarray:
    """How many of the selected ``rows`` carry each feature."""
    if rows.shape[0] == 0:
        return np.zeros(n_features, dtype=np.int64)
    starts = indptr[rows]
    stops = indptr[rows + 1]
    picked = np.concatenate([indices[a:b] for a, b in zip(starts, stops)])
    return np.bincount(picked, minlength=n_features).astype(np.int64)


# --------------------------------------------------------------------------
# numba backend
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def item_scores_numba(indptr, indices, weights):
        n_rows = indptr.shape[0] - 1
        out = np.zeros(n_rows, dtype=np.float64)
        for r in range(n_rows):
            a = indptr[r]
            b = indptr[r + 1]
            if b == a:
                continue
            s = 0.0
            for j in range(a, b):
                s += weights[indices[j]]
            out[r] = s / (b - a)
        return out

    @numba.njit(cache=True)
    def feature_counts_numba(indptr, indices, rows, n_features):
        out = np.zeros(n_features, dtype=np.int64)
        for r in rows:
            for j in range(indptr[r], indptr[r + 1]):
                out[indices[j]] += 1
        return out

else:  # pragma: no cover
    item_scores_numba = None
    feature_counts_numba = None


def item_scores(indptr: np.ndarray, indices: np.ndarray, weights: np.ndarray) -> np.ndarray:
    if USE_NUMBA:
        return item_scores_numba(indptr, indices, weights)
    return item_scores_numpy(indptr, indices, weights)


def feature_counts(
    indptr: np.ndarray, indices: np.ndarray, rows: np.ndarray, n_features: int
) -> np.ndarray:
    if USE_NUMBA:
        return feature_counts_numba(indptr, indices, rows, n_features)
    return feature_counts_numpy(indptr, indices, rows, n_features)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
