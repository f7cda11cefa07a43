"""Invariant checks on assembled operators, shared by the CLI and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import subspace_angles

from .graph import (NAMED_TRIPLES, WeightedOperator, assemble_operator, build_graph,
                    dirichlet_energy, weighted_inner)
from .kernel import KERNEL_KINDS, make_kernel
from .oracle import dense_reference_eigs
from .sampler import product_polynomial_density, truncated_mixture_density, uniform_density
from .spectral import eigensolve

__all__ = [
    "CheckResult",
    "self_adjoint_residual",
    "energy_residual",
    "null_residual",
    "special_case_residual",
    "solver_agreement",
    "random_instance",
    "inject_asymmetry",
    "run_suite",
    "TOLERANCES",
]

TOLERANCES = {
    "self_adjoint": 1e-10,
    "energy_identity": 1e-10,
    "null_vector": 1e-10,
    "special_case": 1e-13,
    "solver_eigenvalues": 1e-8,
    "solver_angle": 1e-6,
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tol: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tol)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{tag} {self.name}: residual {self.value:.3e}, tolerance {self.tol:.0e}{extra}"


def self_adjoint_residual(op: WeightedOperator, rng: np.random.Generator, trials: int = 3) -> float:
    """max |<Lu,v> - <u,Lv>| / (||Lu|| ||v|| + ||u|| ||Lv||) over random pairs."""
    worst = 0.0
    for _ in range(trials):
        u, v = rng.standard_normal(op.n), rng.standard_normal(op.n)
        Lu, Lv = op.apply(u), op.apply(v)
        scale = op.norm(Lu) * op.norm(v) + op.norm(u) * op.norm(Lv)
        gap = abs(weighted_inner(Lu, v, op) - weighted_inner(u, Lv, op))
        worst = max(worst, gap / scale if scale > 0 else gap)
    return worst


def energy_residual(op: WeightedOperator, rng: np.random.Generator, trials: int = 3) -> float:
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(op.n)
        quad = weighted_inner(op.apply(u), u, op)
        energy = dirichlet_energy(u, op)
        worst = max(worst, abs(quad - energy) / max(abs(energy), 1e-300))
    return worst


def null_residual(op: WeightedOperator) -> float:
    """||L z|| / (||L|| ||z||) for z = d^(r/(q-1)), both norms in the (w, n) geometry."""
    z = op.null_vector()
    return op.norm(op.apply(z)) / (op.opnorm_bound() * op.norm(z))


def special_case_residual(op: WeightedOperator, rng: np.random.Generator) -> float:
    """Compare with the textbook forms for (1, 2, 0) and (2, 2, 0)."""
    t = op.graph.triple
    g = op.graph
    u = rng.standard_normal(op.n)
    direct = (g.deg * u - g.W @ u) / op.eps**2
    if (t.p, t.q, t.r) == (2.0, 2.0, 0.0):
        direct = direct / g.deg
    elif (t.p, t.q, t.r) != (1.0, 2.0, 0.0):
        raise ValueError("special-case check applies to (1, 2, 0) and (2, 2, 0) only")
    got = op.apply(u)
    return float(np.linalg.norm(got - direct) / np.linalg.norm(direct))


def solver_agreement(op: WeightedOperator, K: int) -> tuple[float, float]:
    """(max eigenvalue gap, largest principal angle) between Lanczos and the dense oracle.

    Angles are measured after mapping both bases to Euclidean coordinates
    with B^1/2, where the eigenvectors are orthonormal.
    """
    it = eigensolve(op, K, method="lanczos")
    ref = dense_reference_eigs(op.graph, K)
    gap = float(np.abs(it.eigenvalues - ref.eigenvalues).max())
    rb = np.sqrt(op.inner_weight)[:, None]
    angle = float(np.max(subspace_angles(rb * it.eigenvectors, rb * ref.eigenvectors)))
    return gap, angle


def random_instance(rng: np.random.Generator, triple, n_range=(60, 400), dims=(1, 2, 3)):
    """Random cloud, kernel and radius; returns an assembled operator."""
    d = int(rng.choice(dims))
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    kind = int(rng.integers(3))
    if kind == 0:
        density = uniform_density(d)
    elif kind == 1:
        density = truncated_mixture_density(d, w0=float(rng.uniform(0.2, 0.8)),
                                            sigma=float(rng.uniform(0.15, 0.4)))
    else:
        density = product_polynomial_density(rng.uniform(-1.5, 1.5, size=d).tolist())
    X = density.sample(n, rng)
    kernel = make_kernel(KERNEL_KINDS[int(rng.integers(len(KERNEL_KINDS)))], d)
    eps = float(rng.uniform(1.5, 4.0) * (math.log(n) / n) ** (1.0 / d))
    return assemble_operator(build_graph(X, eps, kernel, triple))


def inject_asymmetry(op: WeightedOperator, scale: float = 1e-3) -> WeightedOperator:
    """Perturb one off-diagonal weight on one side only (a deliberate fault)."""
    W = sp.csr_matrix(op.graph.W, copy=True)
    rows = np.repeat(np.arange(W.shape[0]), np.diff(W.indptr))
    off = np.nonzero(rows != W.indices)[0]
    if off.size == 0:
        raise ValueError("graph has no off-diagonal edge to perturb")
    W.data[off[0]] *= 1.0 + scale
    return op.with_graph(W=W)


def run_suite(graphs: int = 5, n_range=(60, 400), seed: int = 0, solver_K: int = 6,
              fault: bool = False, triples: dict | None = None) -> list[CheckResult]:
    """Every invariant over ``graphs`` random instances of each triple (default: the named ones)."""
    rng = np.random.default_rng(seed)
    worst = {k: 0.0 for k in TOLERANCES}
    where = {k: "" for k in TOLERANCES}

    def note(key, value, label):
        if value > worst[key] or not np.isfinite(value):
            worst[key], where[key] = value, label

    for name, triple in (triples or NAMED_TRIPLES).items():
        for g in range(graphs):
            op = random_instance(rng, triple, n_range=n_range)
            if fault:
                op = inject_asymmetry(op)
            label = f"triple {name}, graph {g}, n={op.n}"
            note("self_adjoint", self_adjoint_residual(op, rng), label)
            note("energy_identity", energy_residual(op, rng), label)
            note("null_vector", null_residual(op), label)
            if (triple.p, triple.q, triple.r) in ((1.0, 2.0, 0.0), (2.0, 2.0, 0.0)):
                note("special_case", special_case_residual(op, rng), label)
            if g == 0:
                gap, angle = solver_agreement(op, min(solver_K, op.n - 1))
                note("solver_eigenvalues", gap, label)
                note("solver_angle", angle, label)
    return [CheckResult(k, worst[k], TOLERANCES[k], where[k]) for k in TOLERANCES]
