import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcrwle.graph import NAMED_TRIPLES, NORMALIZED, Q_ONE, UNNORMALIZED, assemble_operator, build_graph
from pcrwle.kernel import make_kernel
from pcrwle.regress import (dump_fit, empirical_error, fit_on_operator, make_plan, pcr_fit,
                            predict_nearest, tuned_K)
from pcrwle.sampler import builtin_regression, sample_cloud, uniform_density
from pcrwle.spectral import eigensolve


def test_tuned_K_examples():
    assert tuned_K(1, 1.0, 1000, 1) == 10
    assert tuned_K(1, 0.01, 1000, 1) == 1
    assert tuned_K(1, 2000.0, 1000, 1) == 1000


@given(st.integers(1, 4), st.floats(0.01, 100), st.integers(2, 10**6), st.integers(1, 3))
def test_tuned_K_in_range(s, M, n, d):
    K = tuned_K(s, M, n, d)
    assert 1 <= K <= n


def test_plan_bracket():
    p = make_plan(1, 1.0, 1000, 1)
    assert p.eps_lower == pytest.approx(2 * math.log(1000) / 1000)
    assert p.eps_upper == pytest.approx(0.1)
    assert p.feasible and p.eps == pytest.approx(math.sqrt(p.eps_lower * p.eps_upper))
    p2 = make_plan(2, 1.0, 1000, 1)
    assert p2.eps_lower == pytest.approx(2 * max(math.log(1000) / 1000, 1000 ** (-1 / 3)))
    with pytest.raises(ValueError, match="clamps K"):
        make_plan(1, 1.0, 100, 1, K=101)
    with pytest.raises(ValueError):
        make_plan(0, 1.0, 100, 1)


def setup(n=300, triple=UNNORMALIZED, seed=0, noise=1.0, f="cosine_neumann"):
    cloud = sample_cloud(uniform_density(1), builtin_regression(f), n, noise_sd=noise, seed=seed)
    plan = make_plan(1, builtin_regression(f).sobolev_M, n, 1)
    op = assemble_operator(build_graph(cloud.X, plan.eps, make_kernel(), triple))
    return cloud, plan, op


@pytest.mark.parametrize("name", ["unnormalized", "random_walk", "q_one"])
def test_constant_reproduced(name):
    cloud, plan, op = setup(triple=NAMED_TRIPLES[name], noise=0.0, f="constant")
    fit = fit_on_operator(cloud.Y, op, plan)
    assert np.abs(fit.fitted - 1.0).max() < 1e-8


def test_full_basis_interpolates():
    cloud, _, _ = setup(n=120)
    plan = make_plan(1, 1.0, 120, 1, K=120, eps=0.1)
    fit = pcr_fit(cloud, plan, NORMALIZED, make_kernel())
    assert np.abs(fit.fitted - cloud.Y).max() < 1e-8


def test_eigenvector_response_gives_unit_coefficient():
    _, plan, op = setup()
    basis = eigensolve(op, plan.K)
    for j in (0, 3):
        fit = fit_on_operator(basis.eigenvectors[:, j], op, plan, basis=basis)
        e = np.zeros(plan.K)
        e[j] = 1.0
        assert np.allclose(fit.coefficients, e, atol=1e-8)


def test_projection_linear_and_contracting():
    cloud, plan, op = setup(triple=NORMALIZED)
    basis = eigensolve(op, plan.K)
    truth = cloud.truth()
    noise = cloud.Y - truth
    fy = fit_on_operator(cloud.Y, op, plan, basis=basis).fitted
    ft = fit_on_operator(truth, op, plan, basis=basis).fitted
    fn = fit_on_operator(noise, op, plan, basis=basis).fitted
    assert np.allclose(fy, ft + fn, atol=1e-12)
    assert op.norm(fy) <= op.norm(cloud.Y) * (1 + 1e-12)
    # idempotent, and the residual is orthogonal to the span
    again = fit_on_operator(fy, op, plan, basis=basis).fitted
    assert np.allclose(again, fy, atol=1e-10)
    r = cloud.Y - fy
    assert all(abs(op.inner(r, v)) < 1e-10 for v in basis.eigenvectors.T)
    # bias identity: ||f - P f||^2 = ||f||^2 - ||P f||^2
    assert op.norm(truth - ft) ** 2 == pytest.approx(op.norm(truth) ** 2 - op.norm(ft) ** 2, rel=1e-8)


def test_empirical_error():
    cloud, plan, op = setup(triple=Q_ONE)
    t = cloud.truth()
    assert empirical_error(t, t, op) == (0.0, 0.0)
    werr, err = empirical_error(cloud.Y, t, op)
    assert werr == err
    with pytest.raises(ValueError):
        empirical_error(t[:5], t[:5], op)


def test_plan_n_mismatch_and_helpers(tmp_path):
    cloud, plan, op = setup(n=100)
    with pytest.raises(ValueError):
        pcr_fit(cloud, make_plan(1, 1.0, 99, 1), UNNORMALIZED, make_kernel())
    fit = pcr_fit(cloud, plan, UNNORMALIZED, make_kernel())
    assert fit.connected
    assert np.array_equal(predict_nearest(fit, cloud.X, cloud.X[:7]), fit.fitted[:7])
    lines = dump_fit(fit, cloud, tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "i,x_1,y,fitted" and len(lines) == 101
