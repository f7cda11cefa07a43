import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcrwle.neighbors import radius_pairs


def brute(X, eps):
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    i, j = np.nonzero(D <= eps)
    return i, j, D[i, j]


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_matches_brute_force(d):
    X = np.random.default_rng(d).random((250, d))
    eps = 0.3 if d > 2 else 0.1
    rows, cols, dist = radius_pairs(X, eps)
    bi, bj, bd = brute(X, eps)
    assert np.array_equal(rows, bi) and np.array_equal(cols, bj)
    assert np.allclose(dist, bd, atol=1e-14)


def test_sorted_and_symmetric():
    X = np.random.default_rng(0).random((400, 2))
    rows, cols, dist = radius_pairs(X, 0.12)
    key = rows * 400 + cols
    assert np.all(np.diff(key) > 0)
    lookup = dict(zip(zip(rows.tolist(), cols.tolist()), dist.tolist()))
    assert all(lookup[(j, i)] == v for (i, j), v in lookup.items())


@given(st.integers(2, 60), st.floats(0.01, 1.5))
def test_self_pairs_always_present(n, eps):
    X = np.random.default_rng(n).random((n, 2))
    rows, cols, dist = radius_pairs(X, eps)
    diag = rows == cols
    assert diag.sum() == n and np.all(dist[diag] == 0)
