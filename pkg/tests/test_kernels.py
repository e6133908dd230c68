import numpy as np
import pytest

from convosim import _kernels

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def random_csr(rng, n_rows, n_features, max_len=6):
    lengths = rng.integers(0, max_len + 1, size=n_rows)
    indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    indices = np.concatenate(
        [np.sort(rng.choice(n_features, size=min(l, n_features), replace=False)) for l in lengths]
    ).astype(np.int64) if lengths.sum() else np.zeros(0, np.int64)
    indptr = np.concatenate([[0], np.cumsum(np.minimum(lengths, n_features))]).astype(np.int64)
    return indptr, indices


@pytest.mark.parametrize("seed", range(5))
def test_item_scores_backends_identical(seed):
    rng = np.random.default_rng(seed)
    indptr, indices = random_csr(rng, 300, 25)
    w = rng.random(25)
    a = _kernels.item_scores_numpy(indptr, indices, w)
    b = _kernels.item_scores_numba(indptr, indices, w)
    assert np.array_equal(a, b)
    for r in range(300):
        seg = indices[indptr[r]:indptr[r + 1]]
        expected = w[seg].mean() if seg.size else 0.0
        assert a[r] == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_feature_counts_backends_identical(seed):
    rng = np.random.default_rng(seed)
    indptr, indices = random_csr(rng, 200, 15)
    rows = np.sort(rng.choice(200, size=40, replace=False)).astype(np.int64)
    a = _kernels.feature_counts_numpy(indptr, indices, rows, 15)
    b = _kernels.feature_counts_numba(indptr, indices, rows, 15)
    assert np.array_equal(a, b)
    expected = np.zeros(15, np.int64)
    for r in rows:
        for j in indices[indptr[r]:indptr[r + 1]]:
            expected[j] += 1
    assert np.array_equal(a, expected)


def test_empty_rows():
    empty = np.zeros(0, np.int64)
    assert _kernels.feature_counts_numpy(np.array([0, 0]), empty, empty, 3).tolist() == [0, 0, 0]
    assert _kernels.item_scores_numpy(np.array([0, 0]), empty, np.ones(3)).tolist() == [0.0]
