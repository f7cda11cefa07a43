"""Acceptance criteria 1-8, each printing one PASS/FAIL line.

Run alone with ``pytest -m acceptance -s``. The Monte Carlo criteria take
most of the time (about 20 minutes on one core in total).
"""

import math
import time

import numpy as np
import pytest

from pcrwle.bench import ExperimentConfig, LepskiSettings, run_experiment
from pcrwle.checks import (energy_residual, null_residual, random_instance, self_adjoint_residual,
                           solver_agreement, special_case_residual)
from pcrwle.graph import NAMED_TRIPLES, RANDOM_WALK, UNNORMALIZED, assemble_operator, build_graph
from pcrwle.kernel import kde_degrees, make_kernel
from pcrwle.oracle import continuum_eigs_1d, nonlocal_apply
from pcrwle.sampler import builtin_regression, uniform_density
from pcrwle.spectral import eigensolve, weyl_slope

pytestmark = pytest.mark.acceptance

N_GRID = (500, 1000, 2000, 4000, 8000)
TARGET = -2.0 / 3.0


def rate_config(mode: str) -> ExperimentConfig:
    return ExperimentConfig(
        n_grid=N_GRID, reps=20, density=uniform_density(1),
        regression=builtin_regression("cosine_neumann", k=1), kernel=make_kernel("uniform", 1),
        triple=UNNORMALIZED, mode=mode, seed=2024,
        lepski=LepskiSettings(s_min=1, s_max=3, M_min=0.2, M_max=20.0, relative_M=True),
    )


def test_criterion_1_oracle_rate(criterion):
    start = time.perf_counter()
    report = run_experiment(rate_config("oracle"))
    elapsed = time.perf_counter() - start
    slope = report.slope
    ok = (report.summary["failed"] == 0 and slope is not None
          and abs(slope - TARGET) <= 0.2 and elapsed <= 600)
    meds = ", ".join(f"{m:.3g}" for m in report.medians())
    criterion(1, ok, f"oracle slope {slope:.4f} (target {TARGET:.4f} +/- 0.2), "
                     f"runtime {elapsed:.0f} s (limit 600), medians [{meds}]")
    assert ok


def test_criterion_2_adaptive_rate(criterion):
    report = run_experiment(rate_config("lepski"))
    slope = report.slope
    adapt = report.medians("werr")
    oracle = report.medians("oracle_werr")
    ratios = adapt / oracle
    ok = (report.summary["failed"] == 0 and slope is not None
          and abs(slope - TARGET) <= 0.25 and bool(np.all(ratios <= 4.0)))
    fallbacks = sum(bool(r.get("fallback")) for r in report.records)
    criterion(2, ok, f"adaptive slope {slope:.4f} (target {TARGET:.4f} +/- 0.25), "
                     f"max median ratio adaptive/oracle {ratios.max():.3f} (limit 4), "
                     f"fallbacks {fallbacks}/{len(report.records)}")
    assert ok


def test_criterion_3_weyl(criterion):
    X = np.random.default_rng(0).random((4000, 1))
    kernel = make_kernel("uniform", 1)
    op = assemble_operator(build_graph(X, 0.05, kernel, UNNORMALIZED))
    basis = eigensolve(op, 15)
    slope = weyl_slope(basis, 2, 15)
    lam2 = basis.eigenvalues[1]
    target = continuum_eigs_1d(kernel.sigma1, 2).eigenvalues[1]
    rel = abs(lam2 - target) / target
    # diagnostic only: the same fit against the mode index k - 1
    k = np.arange(2, 16)
    mode_slope = np.polyfit(np.log(k - 1), np.log(basis.eigenvalues[1:15]), 1)[0]
    ok = 1.7 <= slope <= 2.3 and rel <= 0.15
    criterion(3, ok, f"slope over k=2..15 {slope:.4f} (range [1.7, 2.3]); lambda_2 {lam2:.4f} "
                     f"vs {target:.4f}, rel. gap {rel:.3f} (limit 0.15); "
                     f"slope against mode index k-1 {mode_slope:.4f}")
    assert ok


def test_criterion_4_identities(criterion):
    rng = np.random.default_rng(4)
    worst = {"self_adjoint": 0.0, "energy": 0.0, "null": 0.0}
    for triple in NAMED_TRIPLES.values():
        for _ in range(100):
            op = random_instance(rng, triple)
            worst["self_adjoint"] = max(worst["self_adjoint"], self_adjoint_residual(op, rng))
            worst["energy"] = max(worst["energy"], energy_residual(op, rng))
            worst["null"] = max(worst["null"], null_residual(op))
    ok = all(v <= 1e-10 for v in worst.values())
    criterion(4, ok, "400 graphs; worst residuals " + ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
              + " (limit 1e-10)")
    assert ok


def test_criterion_5_special_cases(criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for triple in (UNNORMALIZED, RANDOM_WALK):
        for _ in range(50):
            op = random_instance(rng, triple)
            worst = max(worst, special_case_residual(op, rng))
    ok = worst <= 1e-13
    criterion(5, ok, f"100 graphs, worst relative gap {worst:.2e} (limit 1e-13)")
    assert ok


def test_criterion_6_solver_oracle(criterion):
    rng = np.random.default_rng(6)
    names = list(NAMED_TRIPLES)
    gap = angle = 0.0
    for i in range(20):
        op = random_instance(rng, NAMED_TRIPLES[names[i % 4]], n_range=(200, 1500))
        g, a = solver_agreement(op, int(rng.integers(4, 11)))
        gap, angle = max(gap, g), max(angle, a)
    ok = gap <= 1e-8 and angle <= 1e-6
    criterion(6, ok, f"20 instances, max eigenvalue gap {gap:.2e} (limit 1e-8), "
                     f"max principal angle {angle:.2e} (limit 1e-6)")
    assert ok


def test_criterion_7_nonlocal_oracle(criterion):
    kernel = make_kernel("uniform", 1)
    dens = uniform_density(1)
    f = lambda X: np.cos(math.pi * np.asarray(X)[:, 0])
    worst = math.inf
    for x in (0.3, 0.5, 0.7):
        target = kernel.sigma1 * math.pi**2 / 2 * math.cos(math.pi * x)
        gaps = [abs(nonlocal_apply(f, x, e, dens, UNNORMALIZED, kernel) - target)
                for e in (0.1, 0.05, 0.025)]
        # at x = 1/2 the target is 0 and the operator vanishes by symmetry
        if max(gaps) < 1e-9:
            continue
        worst = min(worst, gaps[0] / gaps[1], gaps[1] / gaps[2])
    ok = worst >= 2.0
    criterion(7, ok, f"smallest Richardson ratio {worst:.3f} (limit 2)")
    assert ok


def _sup_deviation(n: int, seed: int, kernel) -> tuple[float, float]:
    X = np.random.default_rng([seed, n]).random((n, 1))
    eps = n ** (-0.2)
    dev = np.abs(kde_degrees(X, eps, kernel).values - 1.0)
    inner = (X[:, 0] >= eps) & (X[:, 0] <= 1.0 - eps)
    return float(dev.max()), float(dev[inner].max())


def test_criterion_8_kde(criterion):
    kernel = make_kernel("uniform", 1)
    full_hits = inner_hits = 0
    for seed in range(20):
        sups = np.array([_sup_deviation(n, seed, kernel) for n in (1000, 4000, 16000)])
        full_hits += bool(np.all(np.diff(sups[:, 0]) < 0))
        inner_hits += bool(np.all(np.diff(sups[:, 1]) < 0))
    ok = inner_hits >= 18
    criterion(8, ok, f"strict decrease in {inner_hits}/20 seeds over interior points "
                     f"({full_hits}/20 over all points), need 18")
    assert ok
