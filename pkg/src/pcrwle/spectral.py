"""Leading eigenpairs of L_{w,n,eps} in the (w, n) geometry.

The generally non-symmetric L is similar to the symmetric
S = B^1/2 L B^-1/2 (B = diag of the inner-product weight). We solve
S z = lambda z and map back with v = sqrt(n) B^-1/2 z so that
||v||_{w,n} = 1.

Small problems go to a dense symmetric solver. Larger ones use a block
Lanczos iteration on the shift-inverted operator (S + tau I)^-1 with full
reorthogonalization, after deflating the exactly known null space (one
vector per connected component); Ritz pairs are extracted with S itself.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .graph import WeightedOperator

__all__ = [
    "EigensolverError",
    "SpectralBasis",
    "eigensolve",
    "eigen_sign_fix",
    "weyl_slope",
    "DENSE_MAX_N",
]

DENSE_MAX_N = 1500
_CLAMP = 1e-10
_SHIFT_INVERT_MAX_DEGREE = 300
_PLAIN_BLOCK = 4


class EigensolverError(RuntimeError):
    def __init__(self, message: str, residuals: np.ndarray | None = None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class SpectralBasis:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    method: str = "dense"

    @property
    def K(self) -> int:
        return len(self.eigenvalues)

    def truncate(self, k: int) -> "SpectralBasis":
        return replace(self, eigenvalues=self.eigenvalues[:k],
                       eigenvectors=self.eigenvectors[:, :k], residuals=self.residuals[:k])

    def dump(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["k", "eigenvalue", "residual"])
            for k, (lam, res) in enumerate(zip(self.eigenvalues, self.residuals), start=1):
                out.writerow([k, repr(float(lam)), repr(float(res))])
        return path


def eigen_sign_fix(basis: SpectralBasis) -> SpectralBasis:
    """Flip each eigenvector so its largest-magnitude entry is positive.

    Ties go to the lowest index.
    """
    V = np.array(basis.eigenvectors, dtype=float, copy=True)
    if V.size:
        lead = np.argmax(np.abs(V), axis=0)
        signs = np.where(V[lead, np.arange(V.shape[1])] < 0, -1.0, 1.0)
        V *= signs
    return replace(basis, eigenvectors=V)


def weyl_slope(basis: SpectralBasis, k_lo: int, k_hi: int) -> float:
    """Least-squares slope of log lambda_k against log k, k = k_lo..k_hi (1-based)."""
    if not 2 <= k_lo < k_hi <= basis.K:
        raise ValueError(f"need 2 <= k_lo < k_hi <= K={basis.K}")
    k = np.arange(k_lo, k_hi + 1)
    lam = np.asarray(basis.eigenvalues[k_lo - 1 : k_hi])
    if np.any(lam <= 0):
        raise ValueError("zero eigenvalue in the fitted range")
    slope, _ = np.polyfit(np.log(k), np.log(lam), 1)
    return float(slope)


# --------------------------------------------------------------------------- #


def _null_basis(op: WeightedOperator) -> np.ndarray:
    """Orthonormal null vectors of S, one per connected component."""
    ncomp, labels = op.graph.components()
    z = np.sqrt(op.inner_weight) * op.null_vector()
    N = np.zeros((op.n, ncomp))
    N[np.arange(op.n), labels] = z
    N /= np.linalg.norm(N, axis=0)
    return N


def _project_out(X: np.ndarray, Q: np.ndarray) -> np.ndarray:
    if Q.shape[1] == 0:
        return X
    for _ in range(2):
        X = X - Q @ (Q.T @ X)
    return X


def _orthonormal_block(X: np.ndarray, basis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Orthonormalize X against ``basis`` and itself, refilling lost directions."""
    X = _project_out(X, basis)
    Q, R = np.linalg.qr(X)
    scale = max(np.abs(np.diag(R)).max(initial=0.0), 1e-300)
    weak = np.abs(np.diag(R)) < 1e-10 * scale
    if weak.any():
        fresh = _project_out(rng.standard_normal((X.shape[0], int(weak.sum()))), basis)
        keep = Q[:, ~weak]
        fresh = _project_out(fresh, keep)
        Qf, _ = np.linalg.qr(fresh)
        Q = np.hstack([keep, Qf])
    return Q


def _expander(S: sp.csr_matrix):
    """Shift-inverted solve, or None for plain Krylov on S.

    Dense rows make LU fill-in expensive, but then ||S|| ~ eps^-2 is small
    and plain Krylov converges in a modest number of steps.
    """
    n = S.shape[0]
    if S.nnz > _SHIFT_INVERT_MAX_DEGREE * n:
        return None
    diag_max = float(np.abs(S.diagonal()).max(initial=0.0))
    tau = max(1e-6 * diag_max, 1e-12)
    return splu((S + tau * sp.identity(n, format="csr")).tocsc()).solve


class _Workspace:
    """Growable column storage for V, S V and the projected matrix V^T S V."""

    def __init__(self, n: int):
        self.V = np.empty((n, 16))
        self.SV = np.empty((n, 16))
        self.H = np.empty((16, 16))
        self.m = 0

    def append(self, Q: np.ndarray, SQ: np.ndarray) -> None:
        m, b = self.m, Q.shape[1]
        if m + b > self.V.shape[1]:
            cap = 2 * (m + b)
            for name in ("V", "SV"):
                grown = np.empty((self.V.shape[0], cap))
                grown[:, :m] = getattr(self, name)[:, :m]
                setattr(self, name, grown)
            H = np.empty((cap, cap))
            H[:m, :m] = self.H[:m, :m]
            self.H = H
        self.V[:, m : m + b] = Q
        self.SV[:, m : m + b] = SQ
        cross = self.V[:, :m].T @ SQ
        self.H[:m, m : m + b] = cross
        self.H[m : m + b, :m] = cross.T
        diag = Q.T @ SQ
        self.H[m : m + b, m : m + b] = 0.5 * (diag + diag.T)
        self.m = m + b


def _lanczos_smallest(S: sp.csr_matrix, k: int, deflate: np.ndarray, tol: float,
                      max_iters: int, rng: np.random.Generator):
    n = S.shape[0]
    avail = n - deflate.shape[1]
    expand = _expander(S)
    block = min(_PLAIN_BLOCK if expand is None else min(k, 4), avail)
    ws = _Workspace(n)
    Q = _orthonormal_block(rng.standard_normal((n, block)), deflate, rng)
    ws.append(Q, S @ Q)
    iters = 0
    theta = Z = res = None
    while True:
        m = ws.m
        # Ritz extraction costs O(m^3); space it out once the basis is large
        if m >= k and (iters % max(1, m // 128) == 0 or iters >= max_iters or m >= avail):
            theta, Y = np.linalg.eigh(ws.H[:m, :m])
            theta, Y = theta[:k], Y[:, :k]
            Z = ws.V[:, :m] @ Y
            res = np.linalg.norm(ws.SV[:, :m] @ Y - Z * theta, axis=0)
            if np.all(res <= tol * np.maximum(1.0, np.abs(theta))):
                return theta, Z, res, iters
        if iters >= max_iters or m >= avail:
            if theta is not None and m >= avail:
                return theta, Z, res, iters
            raise EigensolverError(f"Lanczos did not converge after {iters} iterations", res)
        step = min(block, avail - m)
        X = ws.SV[:, m - Q.shape[1] : m][:, :step] if expand is None else expand(Q[:, :step])
        X = _project_out(X, deflate)
        iters += 1
        Q = _orthonormal_block(X, np.hstack([deflate, ws.V[:, :m]]), rng)[:, :step]
        ws.append(Q, S @ Q)


def _regroup_clusters(lam: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Re-orthonormalize eigenvectors within (near-)degenerate clusters."""
    if len(lam) < 2:
        return Z
    gap = 1e-10 * max(abs(lam[-1]), 1e-300)
    Z = Z.copy()
    start = 0
    for i in range(1, len(lam) + 1):
        if i == len(lam) or lam[i] - lam[i - 1] > gap:
            if i - start > 1:
                Z[:, start:i], _ = np.linalg.qr(Z[:, start:i])
            start = i
    return Z


def eigensolve(operator: WeightedOperator, K: int, tol: float = 1e-9,
               method: str = "auto", seed: int = 0) -> SpectralBasis:
    """First K eigenpairs of L, ascending, normalized in ||.||_{w,n}.

    method: "auto" (dense for n <= 1500), "dense", or "lanczos".
    """
    n = operator.n
    if not 1 <= K <= n:
        raise ValueError(f"K={K} must satisfy 1 <= K <= n={n}")
    if method == "auto":
        method = "dense" if n <= DENSE_MAX_N else "lanczos"
    S = operator.symmetric_matrix()
    if method == "dense":
        lam, Z = sla.eigh(S.toarray(), subset_by_index=[0, K - 1])
    elif method == "lanczos":
        N = _null_basis(operator)
        c = N.shape[1]
        if c >= K:
            lam, Z = np.zeros(K), N[:, :K]
        else:
            rng = np.random.default_rng(seed)
            theta, Zr, _, _ = _lanczos_smallest(S, K - c, N, tol, 50 * K, rng)
            lam = np.concatenate([np.zeros(c), theta])
            Z = np.hstack([N, Zr])
            order = np.argsort(lam, kind="stable")
            lam, Z = lam[order], Z[:, order]
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    lam = np.where((lam < 0) & (lam >= -_CLAMP), 0.0, lam)
    Z = _regroup_clusters(lam, Z)
    V = math.sqrt(n) * Z / np.sqrt(operator.inner_weight)[:, None]
    # true residuals ||L v - lambda v||_{w,n}
    R = operator.apply(V) - V * lam
    res = np.sqrt(np.sum(operator.inner_weight[:, None] * R * R, axis=0) / n)
    basis = SpectralBasis(eigenvalues=lam, eigenvectors=V, residuals=res, method=method)
    return eigen_sign_fix(basis)
