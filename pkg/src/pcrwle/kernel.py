"""Radial kernels supported on [0, 1] and kernel density estimates.

Every kernel is rescaled so that its integral over R^d is one. The second
moment constant ``sigma1 = (1/d) * int |y|^2 eta(|y|) dy`` is what the graph
Laplacian picks up in the small-bandwidth limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .neighbors import RadiusIndex

__all__ = [
    "KernelSpec",
    "KdeEstimate",
    "make_kernel",
    "kernel_eval",
    "kde_at",
    "kde_degrees",
    "kde_fluctuation",
    "kde_deviation_bound",
    "KERNEL_KINDS",
]

_PROFILES = {
    "uniform": lambda t: np.ones_like(t),
    "triangular-decreasing": lambda t: 1.0 - t,
    "epanechnikov-profile": lambda t: 1.0 - t * t,
}
KERNEL_KINDS = tuple(_PROFILES)


def _sphere_area(d: int) -> float:
    # surface area of the unit sphere in R^d
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def _radial_moment(profile, d: int, power: int) -> float:
    val, _ = quad(lambda t: t ** (d - 1 + power) * float(profile(np.asarray(t))), 0.0, 1.0,
                  epsabs=1e-13, epsrel=1e-10, limit=200)
    return _sphere_area(d) * val


@dataclass(frozen=True)
class KernelSpec:
    """Nonincreasing radial profile eta on [0, 1], zero beyond 1."""

    kind: str
    dim: int
    scale: float
    sigma0: float
    sigma1: float

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.where(t <= 1.0, self.scale * _PROFILES[self.kind](np.minimum(t, 1.0)), 0.0)
        return out

    @property
    def eta0(self) -> float:
        return float(self(0.0))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "sigma0": self.sigma0, "sigma1": self.sigma1}


def make_kernel(kind: str = "uniform", dim: int = 1) -> KernelSpec:
    """Build a kernel with the moment constants computed by quadrature."""
    if kind not in _PROFILES:
        raise ValueError(f"unknown kernel kind {kind!r}; choose from {KERNEL_KINDS}")
    if dim < 1:
        raise ValueError("dim must be a positive integer")
    profile = _PROFILES[kind]
    raw0 = _radial_moment(profile, dim, 0)
    scale = 1.0 / raw0
    sigma0 = scale * raw0
    sigma1 = scale * _radial_moment(profile, dim, 2) / dim
    return KernelSpec(kind=kind, dim=dim, scale=scale, sigma0=sigma0, sigma1=sigma1)


def kernel_eval(spec: KernelSpec, t: float) -> float:
    if t < 0:
        raise ValueError("kernel argument must be nonnegative")
    return float(spec(t))


@dataclass(frozen=True)
class KdeEstimate:
    values: np.ndarray
    eps: float
    kernel: KernelSpec


def _kde_sums(points: np.ndarray, queries: np.ndarray, eps: float, spec: KernelSpec) -> np.ndarray:
    # each term is divided by n eps^d before the ascending-index sequential sum,
    # so row sums of the assembled adjacency agree to the last bit
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    norm = n * eps**d
    out = np.zeros(queries.shape[0])
    index = RadiusIndex(points, eps)
    for start, stop, qi, _, dist in index.query(queries):
        terms = spec(dist / eps) / norm
        out[start:stop] = np.bincount(qi, weights=terms, minlength=stop - start)
    return out


def kde_at(points: np.ndarray, x, eps: float, spec: KernelSpec) -> float:
    """(1 / (n eps^d)) sum_j eta(|x - X_j| / eps), self terms included."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(_kde_sums(points, x, eps, spec)[0])


def kde_degrees(points: np.ndarray, eps: float, spec: KernelSpec) -> KdeEstimate:
    if eps <= 0:
        raise ValueError("eps must be positive")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return KdeEstimate(values=_kde_sums(points, points, eps, spec), eps=float(eps), kernel=spec)


def kde_fluctuation(n: int, eps: float, d: int) -> float:
    """sqrt(|log eps| / (n eps^d)), the almost-sure KDE fluctuation scale."""
    return math.sqrt(abs(math.log(eps)) / (n * eps**d))


def kde_deviation_bound(n: int, eps: float, kernel: KernelSpec, g_max: float) -> float:
    """Interior KDE deviation scale g_max/n + eta(0)/(n eps^d) + (n-1)/n (fluct + eps)."""
    d = kernel.dim
    return (g_max / n + kernel.eta0 / (n * eps**d)
            + (n - 1) / n * (kde_fluctuation(n, eps, d) + eps))
