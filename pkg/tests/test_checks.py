import numpy as np
import pytest

from pcrwle.checks import (TOLERANCES, CheckResult, inject_asymmetry, random_instance, run_suite,
                           self_adjoint_residual, solver_agreement, special_case_residual)
from pcrwle.graph import NAMED_TRIPLES, NORMALIZED, RANDOM_WALK


def test_suite_passes():
    results = run_suite(graphs=2, n_range=(60, 200), seed=3)
    assert {r.name for r in results} == set(TOLERANCES)
    assert all(r.passed for r in results), [r.line() for r in results if not r.passed]


def test_fault_is_named():
    results = {r.name: r for r in run_suite(graphs=1, n_range=(60, 120), seed=1, fault=True)}
    assert not results["self_adjoint"].passed
    assert results["self_adjoint"].line().startswith("FAIL self_adjoint")


def test_asymmetry_visible_directly(rng):
    op = random_instance(rng, RANDOM_WALK, n_range=(80, 80))
    assert self_adjoint_residual(op, rng) < 1e-12
    assert self_adjoint_residual(inject_asymmetry(op), rng) > 1e-8


def test_special_case_guard(rng):
    op = random_instance(rng, NORMALIZED, n_range=(50, 50))
    with pytest.raises(ValueError):
        special_case_residual(op, rng)


@pytest.mark.parametrize("name", list(NAMED_TRIPLES))
def test_solver_agreement(name, rng):
    op = random_instance(rng, NAMED_TRIPLES[name], n_range=(150, 300))
    gap, angle = solver_agreement(op, 5)
    assert gap < 1e-8 and angle < 1e-6


def test_line_format():
    r = CheckResult("null_vector", 3e-14, 1e-10, "triple q_one")
    assert r.passed and r.line() == "PASS null_vector: residual 3.000e-14, tolerance 1e-10 (triple q_one)"
    assert not CheckResult("x", float("nan"), 1.0).passed
