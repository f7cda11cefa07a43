"""Brute-force references used to check the fast code paths.

Everything here favors transparency over speed: the dense reference
materializes L entry by entry from the coordinate formula, and the non-local
operator and its Dirichlet energy are evaluated by adaptive quadrature in
d = 1 on [0, 1].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .graph import WeightedGraph, WeightTriple
from .kernel import KernelSpec
from .sampler import DensitySpec
from .spectral import SpectralBasis, eigen_sign_fix

__all__ = [
    "OracleError",
    "ContinuumSpectrum",
    "dense_laplacian",
    "dense_reference_eigs",
    "nonlocal_apply",
    "nonlocal_seminorm",
    "continuum_eigs_1d",
    "DENSE_REFERENCE_MAX_N",
]

DENSE_REFERENCE_MAX_N = 2000
QUAD_TOL = 1e-8


class OracleError(RuntimeError):
    pass


def dense_laplacian(graph: WeightedGraph) -> np.ndarray:
    """L_ij = eps^-2 d_i^a (delta_ij d_i - w_ij) d_j^c as a dense array."""
    t = graph.triple
    d = graph.deg
    W = graph.W.toarray()
    a = d ** t.left_exp
    c = d ** t.right_exp
    L = -W.copy()
    L[np.diag_indices_from(L)] += d
    return a[:, None] * L * c[None, :] / graph.eps**2


def dense_reference_eigs(graph: WeightedGraph, K: int) -> SpectralBasis:
    """First K eigenpairs from a full dense decomposition of B^1/2 L B^-1/2."""
    n = graph.n
    if n > DENSE_REFERENCE_MAX_N:
        raise ValueError(f"dense reference limited to n <= {DENSE_REFERENCE_MAX_N}, got {n}")
    if not 1 <= K <= n:
        raise ValueError(f"K={K} must satisfy 1 <= K <= n={n}")
    L = dense_laplacian(graph)
    b = graph.deg ** graph.triple.inner_exp
    rb = np.sqrt(b)
    S = rb[:, None] * L / rb[None, :]
    S = 0.5 * (S + S.T)
    lam, Z = np.linalg.eigh(S)
    lam, Z = lam[:K], Z[:, :K]
    V = math.sqrt(n) * Z / rb[:, None]
    R = L @ V - V * lam
    res = np.sqrt(np.sum(b[:, None] * R * R, axis=0) / n)
    return eigen_sign_fix(SpectralBasis(eigenvalues=lam, eigenvectors=V, residuals=res,
                                        method="dense-reference"))


# --------------------------------------------------------------------------- #
# quadrature oracles, d = 1 on [0, 1]


def _scalar(fn):
    return lambda t: float(np.asarray(fn(np.array([[t]])), dtype=float).ravel()[0])


def _quad(fn, lo: float, hi: float, tol: float, points=None) -> tuple[float, float]:
    if hi <= lo:
        return 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, err = quad(fn, lo, hi, epsabs=tol * 1e-2, epsrel=tol, limit=400, points=points)
        except IntegrationWarning as exc:
            raise OracleError(f"quadrature did not converge on [{lo}, {hi}]: {exc}") from None
    if not (math.isfinite(val) and math.isfinite(err)):
        raise OracleError(f"quadrature on [{lo}, {hi}] gave a non-finite value")
    return val, err


def _check_1d(density: DensitySpec, kernel: KernelSpec) -> None:
    if density.dim != 1 or kernel.dim != 1:
        raise ValueError("quadrature oracles support d = 1 only")


def nonlocal_apply(f, x: float, eps: float, density: DensitySpec, triple: WeightTriple,
                   kernel: KernelSpec, tol: float = QUAD_TOL, with_error: bool = False):
    """Population operator L_{w,eps} f at a point x of [0, 1].

    The integral over z is taken in the scaled variable t = (z - x) / eps,
    restricted to the part of [-1, 1] that keeps z inside [0, 1].
    """
    _check_1d(density, kernel)
    if eps <= 0:
        raise ValueError("eps must be positive")
    p, q, r = triple.p, triple.q, triple.r
    g = _scalar(density.pdf)
    fs = _scalar(f)
    gx = g(x)
    hx = gx ** (-r) * fs(x)
    pref = gx ** (1.0 - p) / gx ** (1.0 - q / 2.0)

    def integrand(t):
        z = x + eps * t
        gz = g(z)
        return float(kernel(abs(t))) * (hx - gz ** (-r) * fs(z)) * gz ** (q / 2.0)

    lo, hi = max(-1.0, -x / eps), min(1.0, (1.0 - x) / eps)
    v1, e1 = _quad(integrand, lo, min(0.0, hi), tol)
    v2, e2 = _quad(integrand, max(0.0, lo), hi, tol)
    val = pref * (v1 + v2) / eps**2
    if with_error:
        return val, abs(pref) * (e1 + e2) / eps**2
    return val


def nonlocal_seminorm(f, eps: float, density: DensitySpec, triple: WeightTriple,
                      kernel: KernelSpec, tol: float = QUAD_TOL) -> float:
    """Half the non-local Dirichlet energy, E_{w,eps}(f, [0, 1]) / 2."""
    _check_1d(density, kernel)
    if eps <= 0:
        raise ValueError("eps must be positive")
    q, r = triple.q, triple.r
    g = _scalar(density.pdf)
    fs = _scalar(f)

    def h(t):
        return g(t) ** (-r) * fs(t)

    def inner(x):
        gx, hx = g(x), h(x)

        def integrand(t):
            z = x + eps * t
            dh = hx - h(z)
            return float(kernel(abs(t))) * dh * dh * g(z) ** (q / 2.0)

        lo, hi = max(-1.0, -x / eps), min(1.0, (1.0 - x) / eps)
        v1, _ = _quad(integrand, lo, min(0.0, hi), tol)
        v2, _ = _quad(integrand, max(0.0, lo), hi, tol)
        return gx ** (q / 2.0) * (v1 + v2)

    # inner limits change shape at x = eps and x = 1 - eps
    brk = [b for b in (eps, 1.0 - eps) if 0.0 < b < 1.0]
    val, _ = _quad(inner, 0.0, 1.0, tol, points=brk or None)
    return 0.5 * val / eps**2


@dataclass(frozen=True)
class ContinuumSpectrum:
    """Neumann spectrum of the limit operator for uniform density on [0, 1]."""

    sigma1: float
    eigenvalues: np.ndarray
    d: int = 1

    def eigenfunction(self, k: int, x) -> np.ndarray:
        return np.cos(k * math.pi * np.asarray(x, dtype=float))


def continuum_eigs_1d(sigma1: float, count: int) -> ContinuumSpectrum:
    """lambda_k = sigma1 (pi k)^2 / 2 for k = 0 .. count - 1."""
    if count < 1:
        raise ValueError("count must be at least 1")
    k = np.arange(count, dtype=float)
    return ContinuumSpectrum(sigma1=float(sigma1), eigenvalues=sigma1 * (math.pi * k) ** 2 / 2.0)
