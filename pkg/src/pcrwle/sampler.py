"""Synthetic regression problems on the unit box.

Densities are restricted to forms with exact normalizing constants so that
their lower/upper bounds and Lipschitz constants are known analytically.
Regression functions come from a small catalog; each entry carries declared
smoothness ``s`` and Sobolev radius ``M`` (derived for the uniform density,
where the weighted and classical Sobolev norms coincide).

Randomness: ``sample_cloud`` splits ``np.random.SeedSequence(seed)`` into two
child streams, the first for the sample locations and the second for the
noise. Calls are pure functions of their arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

__all__ = [
    "SamplerError",
    "DensitySpec",
    "RegressionSpec",
    "PointCloud",
    "uniform_density",
    "truncated_mixture_density",
    "product_polynomial_density",
    "density_from_dict",
    "builtin_regression",
    "regression_from_dict",
    "sample_cloud",
    "REGRESSION_CATALOG",
]


class SamplerError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def _tn_mass(mu: float, sigma: float) -> float:
    # normal mass of [0, 1]
    return 0.5 * (erf((1.0 - mu) / (_SQRT2 * sigma)) - erf((0.0 - mu) / (_SQRT2 * sigma)))


def _tn_pdf(t: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    z = (t - mu) / sigma
    return np.exp(-0.5 * z * z) / (_SQRT2PI * sigma * _tn_mass(mu, sigma))


@dataclass(frozen=True)
class DensitySpec:
    """Sampling density on [0, 1]^dim.

    kind = "uniform": params unused.
    kind = "truncated-mixture": params = (w0, sigma, mu_1, ..., mu_dim);
        g(x) = w0 + (1 - w0) * prod_k TN(x_k; mu_k, sigma), each factor a
        normal density truncated to [0, 1].
    kind = "product-polynomial": params = (a_1, ..., a_dim) with |a_k| < 2;
        g(x) = prod_k (1 + a_k (x_k - 1/2)).
    """

    dim: int
    kind: str
    params: tuple[float, ...] = ()
    g_min: float = 1.0
    g_max: float = 1.0
    lipschitz: float = 0.0

    def pdf(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {X.shape[1]}")
        if self.kind == "uniform":
            return np.ones(X.shape[0])
        if self.kind == "truncated-mixture":
            w0, sigma, mus = self.params[0], self.params[1], self.params[2:]
            bump = np.ones(X.shape[0])
            for k in range(self.dim):
                bump *= _tn_pdf(X[:, k], mus[k], sigma)
            return w0 + (1.0 - w0) * bump
        if self.kind == "product-polynomial":
            out = np.ones(X.shape[0])
            for k, a in enumerate(self.params):
                out *= 1.0 + a * (X[:, k] - 0.5)
            return out
        raise ValueError(f"unknown density kind {self.kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind == "truncated-mixture":
            out.update(w0=self.params[0], sigma=self.params[1], mu=list(self.params[2:]))
        elif self.kind == "product-polynomial":
            out["coefs"] = list(self.params)
        return out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        d = self.dim
        if self.kind == "uniform":
            return rng.random((n, d))
        if self.kind == "product-polynomial":
            # inverse CDF of 1 + a(t - 1/2): F(t) = t + a(t^2 - t)/2
            U = rng.random((n, d))
            X = np.empty_like(U)
            for k, a in enumerate(self.params):
                u = U[:, k]
                if a == 0.0:
                    X[:, k] = u
                    continue
                b = 1.0 - a / 2.0
                # a/2 t^2 + b t - u = 0, root in [0, 1] (numerically stable form)
                X[:, k] = 2.0 * u / (b + np.sqrt(b * b + 2.0 * a * u))
            return np.clip(X, 0.0, 1.0)
        return self._rejection(n, rng)

    def _rejection(self, n: int, rng: np.random.Generator) -> np.ndarray:
        cap = 1000 * n
        out = np.empty((n, self.dim))
        filled = 0
        proposed = 0
        while filled < n:
            if proposed >= cap:
                raise SamplerError(
                    f"rejection sampler exceeded {cap} proposals for n={n}; "
                    "density and envelope g_max are inconsistent"
                )
            batch = min(max(2 * (n - filled), 64), cap - proposed)
            cand = rng.random((batch, self.dim))
            accept = rng.random(batch) * self.g_max <= self.pdf(cand)
            proposed += batch
            got = cand[accept][: n - filled]
            out[filled : filled + len(got)] = got
            filled += len(got)
        return out


def uniform_density(dim: int = 1) -> DensitySpec:
    return DensitySpec(dim=dim, kind="uniform", params=(), g_min=1.0, g_max=1.0, lipschitz=0.0)


def truncated_mixture_density(
    dim: int = 1, w0: float = 0.5, sigma: float = 0.3, mu: float | Sequence[float] = 0.5
) -> DensitySpec:
    if not 0.0 < w0 <= 1.0:
        raise ValueError("mixture weight w0 must lie in (0, 1]")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    mus = tuple(float(m) for m in np.broadcast_to(np.asarray(mu, dtype=float), (dim,)))
    lo, hi, slope = 1.0, 1.0, []
    for m in mus:
        c = 1.0 / (_SQRT2PI * sigma * _tn_mass(m, sigma))
        far = max(abs(m), abs(1.0 - m))
        near = min(max(m, 0.0), 1.0)
        fmin = c * math.exp(-0.5 * (far / sigma) ** 2)
        fmax = c * math.exp(-0.5 * ((near - m) / sigma) ** 2)
        lo *= fmin
        hi *= fmax
        # |d/dt TN| <= c * exp(-1/2) / sigma
        slope.append((c * math.exp(-0.5) / sigma, fmax))
    lip = 0.0
    for k in range(dim):
        others = math.prod(s[1] for j, s in enumerate(slope) if j != k)
        lip += (slope[k][0] * others) ** 2
    return DensitySpec(
        dim=dim,
        kind="truncated-mixture",
        params=(float(w0), float(sigma)) + mus,
        g_min=w0 + (1.0 - w0) * lo,
        g_max=w0 + (1.0 - w0) * hi,
        lipschitz=(1.0 - w0) * math.sqrt(lip),
    )


def product_polynomial_density(coefs: Sequence[float]) -> DensitySpec:
    coefs = tuple(float(a) for a in coefs)
    if any(abs(a) >= 2.0 for a in coefs):
        raise ValueError("product-polynomial coefficients need |a| < 2 to keep g positive")
    lo = math.prod(1.0 - abs(a) / 2.0 for a in coefs)
    hi = math.prod(1.0 + abs(a) / 2.0 for a in coefs)
    lip = 0.0
    for k, a in enumerate(coefs):
        others = math.prod(1.0 + abs(b) / 2.0 for j, b in enumerate(coefs) if j != k)
        lip += (abs(a) * others) ** 2
    return DensitySpec(
        dim=len(coefs),
        kind="product-polynomial",
        params=coefs,
        g_min=lo,
        g_max=hi,
        lipschitz=math.sqrt(lip),
    )


def density_from_dict(cfg: dict, dim: int | None = None) -> DensitySpec:
    kind = cfg.get("kind", "uniform")
    dim = int(cfg.get("dim", dim or 1))
    if kind == "uniform":
        return uniform_density(dim)
    if kind == "truncated-mixture":
        if "mu" in cfg and np.ndim(cfg["mu"]) == 1:
            dim = len(cfg["mu"])
        return truncated_mixture_density(
            dim, w0=cfg.get("w0", 0.5), sigma=cfg.get("sigma", 0.3), mu=cfg.get("mu", 0.5)
        )
    if kind == "product-polynomial":
        coefs = cfg.get("coefs", [0.5] * dim)
        if len(coefs) != dim:
            raise ValueError("product-polynomial needs one coefficient per dimension")
        return product_polynomial_density(coefs)
    raise ValueError(f"unknown density kind {kind!r}")


# ---------------------------------------------------------------------------
# Regression functions
# ---------------------------------------------------------------------------

# Picklable callables so that specs survive process pools.


class _Constant:
    def __init__(self, value: float):
        self.value = value

    def __call__(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.value)


class _Cosine:
    def __init__(self, k: int):
        self.k = k

    def __call__(self, X):
        return np.cos(self.k * np.pi * np.atleast_2d(X)[:, 0])


class _Bump:
    def __call__(self, X):
        X = np.atleast_2d(X)
        out = np.ones(X.shape[0])
        for k in range(X.shape[1]):
            u = 2.0 * X[:, k] - 1.0
            inside = np.abs(u) < 1.0
            val = np.zeros_like(u)
            val[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
            out *= val
        return out


class _Sawtooth:
    def __init__(self, terms: int):
        self.terms = terms

    def __call__(self, X):
        t = np.atleast_2d(X)[:, 0]
        out = np.zeros_like(t)
        for m in range(1, self.terms + 1):
            out += (-1) ** (m + 1) * np.sin(2 * np.pi * m * t) / m
        return out


# ||bump||_{H^s} in d=1 by quadrature of the squared derivatives (peak value 1)
_BUMP_M = {1: 2.5582443091020513, 2: 25.435894227236666, 3: 870.6178312557901}
_BUMP_LIP = 4.3408  # sup |d/dx bump|, d = 1


@dataclass(frozen=True)
class RegressionSpec:
    f: Callable[[np.ndarray], np.ndarray]
    smoothness_s: int
    sobolev_M: float
    lipschitz_of_fg: float | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.f(X)

    def to_dict(self) -> dict:
        return {"name": self.name, **self.params}


def _catalog_constant(value: float = 1.0, **_) -> RegressionSpec:
    # only the L2 part of the norm is nonzero: ||c||^2 = c^2
    return RegressionSpec(_Constant(value), 1, abs(value), 0.0, "constant", {"value": value})


def _catalog_cosine(k: int = 1, **_) -> RegressionSpec:
    # int (f')^2 = (k pi)^2 / 2, int f^2 = 1/2; cos has no zero trace so s = 1
    k = int(k)
    M = math.sqrt(0.5 + 0.5 * (k * math.pi) ** 2)
    return RegressionSpec(_Cosine(k), 1, M, k * math.pi, "cosine_neumann", {"k": k})


def _catalog_bump(s: int = 2, **_) -> RegressionSpec:
    # C_c^infinity bump, in H_0^s for every s; M frozen per s for d = 1
    s = int(s)
    if s not in _BUMP_M:
        raise ValueError(f"bump_compact has declared norms only for s in {sorted(_BUMP_M)}")
    return RegressionSpec(_Bump(), s, _BUMP_M[s], _BUMP_LIP, "bump_compact", {"s": s})


def _catalog_sawtooth(terms: int = 4, **_) -> RegressionSpec:
    # sin(2 pi m x) are orthogonal on [0, 1] as are their derivatives
    terms = int(terms)
    M2 = sum(0.5 * (1.0 + (2 * math.pi * m) ** 2) / m**2 for m in range(1, terms + 1))
    return RegressionSpec(
        _Sawtooth(terms), 1, math.sqrt(M2), 2 * math.pi * terms, "sawtooth_smooth", {"terms": terms}
    )


REGRESSION_CATALOG = {
    "constant": _catalog_constant,
    "cosine_neumann": _catalog_cosine,
    "bump_compact": _catalog_bump,
    "sawtooth_smooth": _catalog_sawtooth,
}


def builtin_regression(name: str, **params) -> RegressionSpec:
    """Look up a catalog regression function.

    ``constant`` (value=1): f = value, any s, gradient seminorm 0.
    ``cosine_neumann`` (k=1): f(x) = cos(k pi x_1), s = 1,
        M^2 = 1/2 + (k pi)^2 / 2.
    ``bump_compact`` (s=2): product of exp(1 - 1/(1 - (2x-1)^2)), zero trace
        of every order; M frozen from quadrature for s in {1, 2, 3}.
    ``sawtooth_smooth`` (terms=4): truncated sawtooth Fourier series
        sum (-1)^(m+1) sin(2 pi m x_1)/m, s = 1.
    """
    try:
        factory = REGRESSION_CATALOG[name]
    except KeyError:
        raise ValueError(
            f"unknown regression function {name!r}; choose from {sorted(REGRESSION_CATALOG)}"
        ) from None
    return factory(**params)


def regression_from_dict(cfg: dict) -> RegressionSpec:
    cfg = dict(cfg)
    return builtin_regression(cfg.pop("name"), **cfg)


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointCloud:
    X: np.ndarray
    Y: np.ndarray
    seed: int | None = None
    density: DensitySpec | None = None
    regression: RegressionSpec | None = None
    noise_sd: float = 0.0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def truth(self) -> np.ndarray:
        if self.regression is None:
            raise ValueError("cloud carries no regression function")
        return np.asarray(self.regression(self.X), dtype=float)


def sample_cloud(
    density: DensitySpec,
    regression: RegressionSpec,
    n: int,
    noise_sd: float = 1.0,
    seed: int = 0,
) -> PointCloud:
    """Draw X_i i.i.d. from ``density`` and Y_i = f(X_i) + noise_sd * xi_i."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    x_seq, noise_seq = np.random.SeedSequence(int(seed)).spawn(2)
    X = density.sample(int(n), np.random.default_rng(x_seq))
    fx = np.asarray(regression(X), dtype=float)
    if fx.shape != (n,):
        raise SamplerError(f"regression function returned shape {fx.shape}, expected ({n},)")
    if not np.all(np.isfinite(fx)):
        raise SamplerError("regression function produced non-finite values")
    xi = np.random.default_rng(noise_seq).standard_normal(n)
    return PointCloud(
        X=X, Y=fx + noise_sd * xi, seed=int(seed), density=density,
        regression=regression, noise_sd=float(noise_sd),
    )
