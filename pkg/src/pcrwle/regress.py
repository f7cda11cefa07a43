"""Principal components regression on weighted Laplacian eigenmaps.

``make_plan`` turns smoothness ``s`` and Sobolev radius ``M`` into the number
of eigenvectors ``K`` and a graph radius ``eps`` inside the admissible
bracket; ``pcr_fit`` projects the responses onto the leading ``K``
eigenvectors in the (w, n) inner product.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .graph import WeightedOperator, WeightTriple, assemble_operator, build_graph
from .kernel import KernelSpec, kde_fluctuation
from .sampler import PointCloud
from .spectral import SpectralBasis, eigensolve

__all__ = [
    "TuningPlan",
    "PcrFit",
    "tuned_K",
    "make_plan",
    "pcr_fit",
    "fit_on_operator",
    "empirical_error",
    "predict_nearest",
    "dump_fit",
    "DEFAULT_C0_EPS",
    "DEFAULT_CAP_EPS",
]

DEFAULT_C0_EPS = 2.0
DEFAULT_CAP_EPS = 1.0


def tuned_K(s: int, M: float, n: int, d: int) -> int:
    """min(max(floor((M^2 n)^(d/(2s+d))), 1), n)."""
    x = (M * M * n) ** (d / (2.0 * s + d))
    # guard floor against representation error, e.g. 1000^(1/3) = 9.999...
    k = math.floor(x * (1.0 + 1e-12))
    return int(min(max(k, 1), n))


@dataclass(frozen=True)
class TuningPlan:
    s: int
    M: float
    n: int
    d: int
    K: int
    eps: float
    eps_lower: float
    eps_upper: float
    c0_eps: float = DEFAULT_C0_EPS
    C0_eps: float = DEFAULT_CAP_EPS
    feasible: bool = True
    kde_fluctuation: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "s": self.s, "M": self.M, "n": self.n, "d": self.d, "K": self.K,
            "eps": self.eps, "eps_lower": self.eps_lower, "eps_upper": self.eps_upper,
            "c0_eps": self.c0_eps, "C0_eps": self.C0_eps, "feasible": self.feasible,
            "kde_fluctuation": self.kde_fluctuation,
        }


def make_plan(s: int, M: float, n: int, d: int, c0_eps: float = DEFAULT_C0_EPS,
              C0_eps: float = DEFAULT_CAP_EPS, K: int | None = None,
              eps: float | None = None) -> TuningPlan:
    """Tuning for known (s, M).

    Lower radius c0 * max((log n / n)^(1/d), (M^2 n)^(-1/(2(s-1)+d))) for
    s >= 2 and c0 * (log n / n)^(1/d) for s = 1; upper radius C0 * K^(-1/d).
    The chosen radius is the geometric mean of the bracket, or the lower end
    (flagged infeasible) when the bracket is empty. ``K`` and ``eps`` may be
    overridden explicitly.
    """
    if s < 1:
        raise ValueError("s must be a positive integer")
    if M <= 0:
        raise ValueError("M must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    if K is None:
        K = tuned_K(s, M, n, d)
    elif not 1 <= K <= n:
        raise ValueError(f"K={K} is outside [1, n={n}]; the tuning rule clamps K to at most n")
    connect = (math.log(n) / n) ** (1.0 / d)
    if s >= 2:
        lower = c0_eps * max(connect, (M * M * n) ** (-1.0 / (2 * (s - 1) + d)))
    else:
        lower = c0_eps * connect
    upper = C0_eps * K ** (-1.0 / d)
    feasible = lower <= upper
    if eps is None:
        eps = math.sqrt(lower * upper) if feasible else lower
    elif eps <= 0:
        raise ValueError("eps must be positive")
    return TuningPlan(s=int(s), M=float(M), n=int(n), d=int(d), K=int(K), eps=float(eps),
                      eps_lower=lower, eps_upper=upper, c0_eps=c0_eps, C0_eps=C0_eps,
                      feasible=feasible, kde_fluctuation=kde_fluctuation(n, eps, d))


@dataclass(frozen=True)
class PcrFit:
    fitted: np.ndarray
    coefficients: np.ndarray
    basis: SpectralBasis
    plan: TuningPlan
    operator: WeightedOperator = field(repr=False)

    @property
    def connected(self) -> bool:
        return self.operator.graph.is_connected


def _project(Y: np.ndarray, basis: SpectralBasis, op: WeightedOperator, K: int):
    V = basis.eigenvectors[:, :K]
    coef = (V * (op.inner_weight * Y)[:, None]).sum(axis=0) / op.n
    fitted = np.zeros(op.n)
    for k in range(K):
        fitted += coef[k] * V[:, k]
    return coef, fitted


def fit_on_operator(Y: np.ndarray, op: WeightedOperator, plan: TuningPlan,
                    basis: SpectralBasis | None = None, method: str = "auto") -> PcrFit:
    """Projection step for a prebuilt operator (and optionally a cached basis)."""
    Y = np.asarray(Y, dtype=float)
    if basis is None:
        basis = eigensolve(op, plan.K, method=method)
    coef, fitted = _project(Y, basis, op, plan.K)
    return PcrFit(fitted=fitted, coefficients=coef, basis=basis.truncate(plan.K), plan=plan, operator=op)


def pcr_fit(cloud: PointCloud, plan: TuningPlan, triple: WeightTriple, kernel: KernelSpec,
            method: str = "auto") -> PcrFit:
    if plan.n != cloud.n:
        raise ValueError(f"plan built for n={plan.n}, cloud has n={cloud.n}")
    graph = build_graph(cloud.X, plan.eps, kernel, triple)
    op = assemble_operator(graph)
    return fit_on_operator(cloud.Y, op, plan, method=method)


def empirical_error(fitted: np.ndarray, truth: np.ndarray, operator: WeightedOperator) -> tuple[float, float]:
    """(||fitted - truth||^2_{w,n}, ||fitted - truth||^2_n)."""
    fitted = np.asarray(fitted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if fitted.shape != truth.shape or fitted.shape != (operator.n,):
        raise ValueError("fitted and truth must both have length n")
    r = fitted - truth
    return float(np.dot(operator.inner_weight * r, r) / operator.n), float(np.dot(r, r) / operator.n)


def predict_nearest(fit: PcrFit, X_train: np.ndarray, X_new: np.ndarray) -> np.ndarray:
    """Out-of-sample values by copying the fitted value of the nearest sample.

    This extension is a convenience; the estimator itself is in-sample only.
    """
    _, idx = cKDTree(np.atleast_2d(X_train)).query(np.atleast_2d(X_new))
    return fit.fitted[idx]


def dump_fit(fit: PcrFit, cloud: PointCloud, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["i"] + [f"x_{k + 1}" for k in range(cloud.dim)] + ["y", "fitted"])
        for i in range(cloud.n):
            out.writerow([i] + [repr(float(v)) for v in cloud.X[i]]
                         + [repr(float(cloud.Y[i])), repr(float(fit.fitted[i]))])
    return path
