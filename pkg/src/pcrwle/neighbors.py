"""Exact fixed-radius neighbor search by uniform grid bucketing.

Pairs are produced query-by-query with neighbor indices in ascending order,
which fixes the summation order of every downstream row sum.
"""

from __future__ import annotations

import itertools
from typing import Iterator

import numpy as np

_GRID_MAX_DIM = 3
_TARGET_CANDIDATES = 2_000_000


def _distances(Q: np.ndarray, P: np.ndarray) -> np.ndarray:
    acc = np.zeros(Q.shape[0])
    for k in range(Q.shape[1]):
        diff = Q[:, k] - P[:, k]
        acc += diff * diff
    return np.sqrt(acc)


class RadiusIndex:
    """Grid of cubic cells with side ``eps`` over a fixed point set.

    Falls back to a chunked linear scan when the dimension exceeds 3.
    """

    def __init__(self, points: np.ndarray, eps: float):
        points = np.ascontiguousarray(points, dtype=float)
        if points.ndim != 2:
            raise ValueError("points must be an (n, d) array")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.points = points
        self.eps = float(eps)
        self.n, self.dim = points.shape
        self.use_grid = self.dim <= _GRID_MAX_DIM
        if self.use_grid:
            # slightly inflated side so that floating floor never skips a cell
            self._side = self.eps * (1.0 + 1e-12)
            cells = np.floor(points / self._side).astype(np.int64)
            self._cmin = cells.min(axis=0)
            self._shape = cells.max(axis=0) - self._cmin + 1
            self._strides = np.cumprod(np.r_[1, self._shape[:-1]]).astype(np.int64)
            keys = (cells - self._cmin) @ self._strides
            self._order = np.argsort(keys, kind="stable")
            self._sorted_keys = keys[self._order]
            self._offsets = np.array(list(itertools.product((-1, 0, 1), repeat=self.dim)), dtype=np.int64)

    def _chunk_len(self, nq: int) -> int:
        if self.use_grid:
            frac = min(1.0, (3.0 * self.eps) ** self.dim)
        else:
            frac = 1.0
        per_query = max(1.0, self.n * frac)
        return int(max(1, min(nq, _TARGET_CANDIDATES // per_query)))

    def _candidates(self, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if not self.use_grid:
            qi = np.repeat(np.arange(Q.shape[0]), self.n)
            pj = np.tile(np.arange(self.n), Q.shape[0])
            return qi, pj
        qcells = np.floor(Q / self._side).astype(np.int64) - self._cmin
        q_parts, p_parts = [], []
        for off in self._offsets:
            c = qcells + off
            valid = np.all((c >= 0) & (c < self._shape), axis=1)
            if not valid.any():
                continue
            qidx = np.nonzero(valid)[0]
            keys = c[qidx] @ self._strides
            lo = np.searchsorted(self._sorted_keys, keys, side="left")
            hi = np.searchsorted(self._sorted_keys, keys, side="right")
            counts = hi - lo
            total = int(counts.sum())
            if total == 0:
                continue
            rep_q = np.repeat(qidx, counts)
            starts = np.repeat(lo - np.cumsum(counts) + counts, counts)
            pos = starts + np.arange(total)
            q_parts.append(rep_q)
            p_parts.append(self._order[pos])
        if not q_parts:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        return np.concatenate(q_parts), np.concatenate(p_parts)

    def query(self, Q: np.ndarray) -> Iterator[tuple[int, int, np.ndarray, np.ndarray, np.ndarray]]:
        """Yield ``(start, stop, qi, pj, dist)`` chunks for all ``||q - p|| <= eps``.

        ``qi`` is relative to ``start``; pairs are sorted by (qi, pj).
        """
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[1] != self.dim:
            raise ValueError("query dimension mismatch")
        step = self._chunk_len(Q.shape[0])
        for start in range(0, Q.shape[0], step):
            block = Q[start : start + step]
            qi, pj = self._candidates(block)
            dist = _distances(block[qi], self.points[pj])
            keep = dist <= self.eps
            qi, pj, dist = qi[keep], pj[keep], dist[keep]
            order = np.argsort(qi * np.int64(self.n) + pj, kind="stable")
            yield start, start + block.shape[0], qi[order], pj[order], dist[order]


def radius_pairs(points: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All ordered pairs (i, j), i and j both ranging over ``points``, within ``eps``."""
    index = RadiusIndex(points, eps)
    rows, cols, dists = [], [], []
    for start, _, qi, pj, dist in index.query(points):
        rows.append(qi + start)
        cols.append(pj)
        dists.append(dist)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(dists)
