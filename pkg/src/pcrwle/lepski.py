"""Simultaneous Lepski selection over a coupled (smoothness, radius) grid.

The grid pairs each smoothness value with one Sobolev radius: the integer
range [s_min, s_max] is stretched over N_l = max(2, round(c_grid log n))
entries in equal blocks, and radii are spaced geometrically from M_min to
M_max. Entry j is admissible when, for every entry i with s_i <= s_j,

    ||f_j - f_i||_{w,n} <= c0 * M_i * (M_i^2 n / log n)^(-s_i / (2 s_i + d)).

The selection is the admissible entry with the largest index (largest s,
then largest M). When nothing is admissible the first entry is returned and
``fallback`` is set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import WeightTriple, assemble_operator, build_graph
from .kernel import KernelSpec
from .regress import DEFAULT_C0_EPS, DEFAULT_CAP_EPS, PcrFit, fit_on_operator, make_plan
from .sampler import PointCloud
from .spectral import eigensolve

__all__ = ["LepskiGrid", "LepskiSelection", "build_grid", "lepski_threshold", "select", "comparison_table"]


@dataclass(frozen=True)
class LepskiGrid:
    pairs: tuple[tuple[int, float], ...]
    s_min: int
    s_max: int
    M_min: float
    M_max: float

    @property
    def N_l(self) -> int:
        return len(self.pairs)

    @property
    def s(self) -> np.ndarray:
        return np.array([p[0] for p in self.pairs])

    @property
    def M(self) -> np.ndarray:
        return np.array([p[1] for p in self.pairs])

    def to_dict(self) -> dict:
        return {"pairs": [[int(s), float(M)] for s, M in self.pairs], "s_min": self.s_min,
                "s_max": self.s_max, "M_min": self.M_min, "M_max": self.M_max}


def build_grid(n: int, s_min: int, s_max: int, M_min: float, M_max: float,
               c_grid: float = 1.0) -> LepskiGrid:
    if not 1 <= s_min <= s_max:
        raise ValueError("need 1 <= s_min <= s_max")
    if not 0 < M_min <= M_max:
        raise ValueError("need 0 < M_min <= M_max")
    if n < 2:
        raise ValueError("n must be at least 2")
    N = max(2, int(round(c_grid * math.log(n))))
    n_s = s_max - s_min + 1
    s_vals = [s_min + (j * n_s) // N for j in range(N)]
    ratio = M_max / M_min
    M_vals = [M_min * ratio ** (j / (N - 1)) for j in range(N)]
    M_vals[-1] = M_max
    return LepskiGrid(tuple(zip(s_vals, M_vals)), int(s_min), int(s_max), float(M_min), float(M_max))


def lepski_threshold(s: int, M: float, n: int, d: int, c0: float = 1.0) -> float:
    return c0 * M * (M * M * n / math.log(n)) ** (-s / (2.0 * s + d))


@dataclass(frozen=True)
class LepskiSelection:
    index: int
    s_hat: int
    M_hat: float
    fit: PcrFit
    fits: tuple[PcrFit, ...]
    grid: LepskiGrid
    distances: np.ndarray
    thresholds: np.ndarray
    admissible: np.ndarray
    c0: float
    fallback: bool = False
    reused: tuple[int, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "index": self.index,
            "s_hat": self.s_hat,
            "M_hat": self.M_hat,
            "c0": self.c0,
            "fallback": self.fallback,
            "thresholds": [float(t) for t in self.thresholds],
            "distances": [[float(v) for v in row] for row in self.distances],
            "admissible": [bool(a) for a in self.admissible],
            "plans": [f.plan.to_dict() for f in self.fits],
        }


def _pair_distance(a: PcrFit, b: PcrFit) -> float:
    # fits on different graphs carry different inner weights; the geometric
    # mean keeps the distance symmetric and exact when the weights agree
    w = np.sqrt(a.operator.inner_weight * b.operator.inner_weight)
    r = a.fitted - b.fitted
    return math.sqrt(float(np.dot(w * r, r)) / len(r))


def select(grid: LepskiGrid, cloud: PointCloud, triple: WeightTriple, kernel: KernelSpec,
           c0: float = 1.0, c0_eps: float = DEFAULT_C0_EPS, C0_eps: float = DEFAULT_CAP_EPS,
           method: str = "auto") -> LepskiSelection:
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    n, d = cloud.n, cloud.dim
    plans = [make_plan(s, M, n, d, c0_eps=c0_eps, C0_eps=C0_eps) for s, M in grid.pairs]
    cache: dict[tuple[float, int], tuple] = {}
    fits, reused = [], []
    for j, plan in enumerate(plans):
        key = (plan.eps, plan.K)
        if key in cache:
            op, basis = cache[key]
            reused.append(j)
        else:
            op = assemble_operator(build_graph(cloud.X, plan.eps, kernel, triple))
            basis = eigensolve(op, plan.K, method=method)
            cache[key] = (op, basis)
        fits.append(fit_on_operator(cloud.Y, op, plan, basis=basis))
    return select_from_fits(grid, fits, n, d, c0, reused=tuple(reused))


def select_from_fits(grid: LepskiGrid, fits, n: int, d: int, c0: float = 1.0,
                     reused: tuple[int, ...] = ()) -> LepskiSelection:
    """Comparison and selection on already computed fits."""
    N = grid.N_l
    s, M = grid.s, grid.M
    dist = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            dist[i, j] = dist[j, i] = _pair_distance(fits[i], fits[j])
    thr = np.array([lepski_threshold(int(s[i]), float(M[i]), n, d, c0) for i in range(N)])
    admissible = np.array([
        all(dist[j, i] <= thr[i] for i in range(N) if s[i] <= s[j]) for j in range(N)
    ])
    if admissible.any():
        idx, fallback = int(np.nonzero(admissible)[0].max()), False
    else:
        idx, fallback = 0, True
    return LepskiSelection(index=idx, s_hat=int(s[idx]), M_hat=float(M[idx]), fit=fits[idx],
                           fits=tuple(fits), grid=grid, distances=dist, thresholds=thr,
                           admissible=admissible, c0=c0, fallback=fallback, reused=reused)


def comparison_table(selection: LepskiSelection) -> list[dict]:
    """One row per ordered pair (candidate j, reference i).

    ``relevant`` marks pairs the rule inspects (s_i <= s_j); ``passed`` is
    distance <= threshold of the reference entry.
    """
    g = selection.grid
    rows = []
    for j in range(g.N_l):
        for i in range(g.N_l):
            rows.append({
                "candidate": j, "reference": i,
                "s_candidate": int(g.s[j]), "M_candidate": float(g.M[j]),
                "s_reference": int(g.s[i]), "M_reference": float(g.M[i]),
                "distance": float(selection.distances[j, i]),
                "threshold": float(selection.thresholds[i]),
                "relevant": bool(g.s[i] <= g.s[j]),
                "passed": bool(selection.distances[j, i] <= selection.thresholds[i]),
            })
    return rows
