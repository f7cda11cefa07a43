"""Epsilon-graphs and the (p, q, r) family of weighted graph Laplacians.

Raw weights ``wt_ij = eta(|X_i - X_j| / eps) / (n eps^d)`` (self loops
included) give KDE degrees ``dt_i``. Re-weighting by
``w_ij = wt_ij / (dt_i^(1 - q/2) dt_j^(1 - q/2))`` gives degrees ``d_i`` and
the Laplacian

    (L u)_i = eps^-2 d_i^a sum_j w_ij (d_i^c u_i - d_j^c u_j),
    a = (1 - p)/(q - 1),  c = -r/(q - 1)          (q != 1)
    L = (D - W) / eps^2                              (q == 1)

which is self-adjoint for <u, v>_{w,n} = (1/n) sum_i b_i u_i v_i with
b_i = d_i^((p - 1 - r)/(q - 1)) (b = 1 when q = 1).

Familiar members: (1, 2, 0) unnormalized D - W, (3/2, 2, 1/2) symmetric
normalized D^-1/2 (D - W) D^-1/2, (2, 2, 0) random walk D^-1 (D - W).
The symmetric normalized form follows the two-branch definition above; the
variant D^-1/2 (D - W) D^+1/2 is not a member of the family.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .kernel import KernelSpec
from .neighbors import radius_pairs

__all__ = [
    "WeightTriple",
    "WeightedGraph",
    "WeightedOperator",
    "UNNORMALIZED",
    "NORMALIZED",
    "RANDOM_WALK",
    "Q_ONE",
    "NAMED_TRIPLES",
    "near_knn_triple",
    "build_adjacency",
    "reweight",
    "build_graph",
    "assemble_operator",
    "weighted_inner",
    "dirichlet_energy",
]


@dataclass(frozen=True)
class WeightTriple:
    """Parameters (p, q, r). ``q_is_one`` selects the q = 1 branch explicitly."""

    p: float
    q: float
    r: float
    q_is_one: bool = False

    def __post_init__(self):
        if self.q_is_one and self.q != 1.0:
            raise ValueError(f"q_is_one is set but q = {self.q}")
        if not self.q_is_one and self.q == 1.0:
            raise ValueError("q = 1 requires q_is_one=True; the q != 1 branch is singular there")

    @classmethod
    def from_dict(cls, cfg: dict) -> "WeightTriple":
        return cls(float(cfg["p"]), float(cfg["q"]), float(cfg["r"]), bool(cfg.get("q_is_one", False)))

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "r": self.r, "q_is_one": self.q_is_one}

    @property
    def left_exp(self) -> float:
        return 0.0 if self.q_is_one else (1.0 - self.p) / (self.q - 1.0)

    @property
    def right_exp(self) -> float:
        return 0.0 if self.q_is_one else -self.r / (self.q - 1.0)

    @property
    def inner_exp(self) -> float:
        return 0.0 if self.q_is_one else (self.p - 1.0 - self.r) / (self.q - 1.0)

    @property
    def sym_exp(self) -> float:
        # S = B^1/2 L B^-1/2 = eps^-2 D^e (D - W) D^e
        return 0.0 if self.q_is_one else (1.0 - self.p - self.r) / (2.0 * (self.q - 1.0))


UNNORMALIZED = WeightTriple(1.0, 2.0, 0.0)
NORMALIZED = WeightTriple(1.5, 2.0, 0.5)
RANDOM_WALK = WeightTriple(2.0, 2.0, 0.0)
Q_ONE = WeightTriple(1.0, 1.0, 0.0, q_is_one=True)
NAMED_TRIPLES = {
    "unnormalized": UNNORMALIZED,
    "normalized": NORMALIZED,
    "random_walk": RANDOM_WALK,
    "q_one": Q_ONE,
}


def near_knn_triple(d: int) -> WeightTriple:
    q = 1.0 - 2.0 / d
    return WeightTriple(1.0, q, 0.0, q_is_one=(q == 1.0))


def _csr_from_sorted(n: int, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray) -> sp.csr_matrix:
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return sp.csr_matrix((vals, cols, indptr), shape=(n, n))


def _with_data(A: sp.csr_matrix, data: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix((data, A.indices, A.indptr), shape=A.shape)


def _rows_of(A: sp.csr_matrix) -> np.ndarray:
    return np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))


def _row_sums(A: sp.csr_matrix) -> np.ndarray:
    # sequential accumulation in ascending column order
    return np.bincount(_rows_of(A), weights=A.data, minlength=A.shape[0])


def build_adjacency(points: np.ndarray, eps: float, kernel: KernelSpec) -> tuple[sp.csr_matrix, np.ndarray]:
    """Raw kernel adjacency (self loops included) and its row sums."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n < 2:
        raise ValueError("need at least two points")
    if kernel.dim != d:
        raise ValueError(f"kernel built for dimension {kernel.dim}, points have {d}")
    # pairs arrive sorted by (row, col) with bitwise symmetric distances,
    # so the matrix is exactly symmetric without any mirroring
    rows, cols, dist = radius_pairs(points, eps)
    Wt = _csr_from_sorted(n, rows, cols, kernel(dist / eps) / (n * eps**d))
    return Wt, _row_sums(Wt)


@dataclass(frozen=True)
class WeightedGraph:
    n: int
    eps: float
    W: sp.csr_matrix
    deg: np.ndarray
    Wt: sp.csr_matrix
    kde_deg: np.ndarray
    triple: WeightTriple
    kernel: KernelSpec | None = None

    @property
    def dim(self) -> int:
        return self.kernel.dim if self.kernel is not None else 1

    def components(self) -> tuple[int, np.ndarray]:
        return connected_components(self.W, directed=False)

    @property
    def is_connected(self) -> bool:
        return self.components()[0] == 1

    def dump_edges(self, path) -> Path:
        """Write ``i, j, wt_ij, w_ij`` for every stored entry."""
        path = Path(path)
        rows = np.repeat(np.arange(self.n), np.diff(self.W.indptr))
        with path.open("w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["i", "j", "w_raw", "w"])
            for i, j, a, b in zip(rows, self.W.indices, self.Wt.data, self.W.data):
                out.writerow([int(i), int(j), repr(float(a)), repr(float(b))])
        return path


def reweight(Wt: sp.csr_matrix, kde_deg: np.ndarray, triple: WeightTriple,
             eps: float = float("nan"), kernel: KernelSpec | None = None) -> WeightedGraph:
    kde_deg = np.asarray(kde_deg, dtype=float)
    if np.any(kde_deg <= 0):
        bad = int(np.argmin(kde_deg))
        raise ValueError(f"nonpositive KDE degree at point {bad}; eps too small for this cloud")
    n = Wt.shape[0]
    expo = 1.0 - triple.q / 2.0
    if expo == 0.0:
        W = Wt.copy()
    else:
        fac = kde_deg ** (-expo)
        # the product fac_i * fac_j is commutative, so W stays exactly symmetric
        W = _with_data(Wt, Wt.data * (fac[_rows_of(Wt)] * fac[Wt.indices]))
    return WeightedGraph(n=n, eps=float(eps), W=W, deg=_row_sums(W), Wt=Wt,
                         kde_deg=kde_deg, triple=triple, kernel=kernel)


def build_graph(points: np.ndarray, eps: float, kernel: KernelSpec, triple: WeightTriple) -> WeightedGraph:
    Wt, kde_deg = build_adjacency(points, eps, kernel)
    return reweight(Wt, kde_deg, triple, eps=eps, kernel=kernel)


class WeightedOperator:
    """Matrix-free action of L_{w,n,eps} together with its inner-product weight."""

    def __init__(self, graph: WeightedGraph):
        t = graph.triple
        if not t.q_is_one and t.q == 1.0:
            raise ValueError("q = 1 supplied without q_is_one")
        d = graph.deg
        if np.any(d <= 0):
            raise ValueError("graph degrees must be strictly positive")
        self.graph = graph
        self.n = graph.n
        self.eps = graph.eps
        self.left = d ** t.left_exp
        self.right = d ** t.right_exp
        self.inner_weight = d ** t.inner_exp

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        g = self.graph
        if u.ndim == 1:
            y = self.right * u
            return self.left * (g.deg * y - g.W @ y) / self.eps**2
        y = self.right[:, None] * u
        return self.left[:, None] * (g.deg[:, None] * y - g.W @ y) / self.eps**2

    __call__ = apply

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return weighted_inner(u, v, self)

    def norm(self, u: np.ndarray) -> float:
        return math.sqrt(max(weighted_inner(u, u, self), 0.0))

    def null_vector(self) -> np.ndarray:
        """z_i = d_i^(r/(q-1)) (ones when q = 1); L z = 0."""
        return 1.0 / self.right

    def symmetric_matrix(self) -> sp.csr_matrix:
        """Sparse S = B^1/2 L B^-1/2 with the self loops cancelled exactly."""
        g = self.graph
        e = g.triple.sym_exp
        s = g.deg**e
        rows, cols = _rows_of(g.W), g.W.indices
        data = -g.W.data * (s[rows] * s[cols]) / self.eps**2
        # self loops are always stored (distance 0), so the diagonal slot exists;
        # it holds (d_i - w_ii) d_i^(2e) / eps^2 as self loops cancel in the form
        on_diag = rows == cols
        i = rows[on_diag]
        data[on_diag] = (g.deg[i] - g.W.data[on_diag]) * s[i] ** 2 / self.eps**2
        return _with_data(g.W, data)

    def opnorm_bound(self) -> float:
        """Upper bound on the operator norm of L in the (w, n) geometry."""
        S = self.symmetric_matrix()
        return float(np.max(np.asarray(abs(S).sum(axis=1)).ravel()))

    def norm_equivalence(self) -> tuple[float, float]:
        """(c, C) with c ||u||_n <= ||u||_{w,n} <= C ||u||_n."""
        b = self.inner_weight
        return math.sqrt(float(b.min())), math.sqrt(float(b.max()))

    def with_graph(self, **changes) -> "WeightedOperator":
        return WeightedOperator(replace(self.graph, **changes))


def assemble_operator(graph: WeightedGraph) -> WeightedOperator:
    return WeightedOperator(graph)


def weighted_inner(u: np.ndarray, v: np.ndarray, operator: WeightedOperator) -> float:
    """(1/n) sum_i b_i u_i v_i."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (operator.n,) or v.shape != (operator.n,):
        raise ValueError(f"vectors must have length {operator.n}")
    return float(np.dot(operator.inner_weight * u, v) / operator.n)


def dirichlet_energy(u: np.ndarray, operator: WeightedOperator) -> float:
    """(1 / (2 n eps^2)) sum_ij w_ij (d_i^c u_i - d_j^c u_j)^2."""
    u = np.asarray(u, dtype=float)
    if u.shape != (operator.n,):
        raise ValueError(f"vector must have length {operator.n}")
    W = operator.graph.W
    rows = np.repeat(np.arange(operator.n), np.diff(W.indptr))
    y = operator.right * u
    diff = y[rows] - y[W.indices]
    return float(np.dot(W.data, diff * diff) / (2.0 * operator.n * operator.eps**2))
