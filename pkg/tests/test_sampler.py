import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats
from scipy.integrate import quad

from pcrwle.sampler import (RegressionSpec, SamplerError, builtin_regression, density_from_dict,
                            product_polynomial_density, sample_cloud, truncated_mixture_density,
                            uniform_density)


def zero_fn():
    return RegressionSpec(lambda X: np.zeros(np.atleast_2d(X).shape[0]), 1, 1.0)


def test_zero_function_zero_noise():
    cloud = sample_cloud(uniform_density(1), zero_fn(), 5, noise_sd=0.0, seed=3)
    assert np.array_equal(cloud.Y, np.zeros(5))


def test_cosine_at_origin_is_one():
    f = builtin_regression("cosine_neumann", k=1)
    assert f(np.array([[0.0]]))[0] == 1.0


def test_reproducible_bitwise():
    dens = truncated_mixture_density(2, w0=0.4, sigma=0.2)
    f = builtin_regression("cosine_neumann")
    a = sample_cloud(dens, f, 300, seed=9)
    b = sample_cloud(dens, f, 300, seed=9)
    assert a.X.tobytes() == b.X.tobytes() and a.Y.tobytes() == b.Y.tobytes()
    c = sample_cloud(dens, f, 300, seed=10)
    assert not np.array_equal(a.X, c.X)


def test_noise_reconstructible_and_unit_variance():
    f = builtin_regression("cosine_neumann")
    cloud = sample_cloud(uniform_density(1), f, 100_000, noise_sd=1.0, seed=1)
    resid = cloud.Y - cloud.truth()
    assert 0.97 <= resid.var(ddof=1) <= 1.03
    _, noise_seq = np.random.SeedSequence(1).spawn(2)
    assert np.allclose(resid, np.random.default_rng(noise_seq).standard_normal(100_000))


def test_mixture_histogram_chi_square():
    dens = truncated_mixture_density(1, w0=0.5, sigma=0.3)
    X = dens.sample(10_000, np.random.default_rng(2))[:, 0]
    edges = np.linspace(0, 1, 21)
    counts, _ = np.histogram(X, edges)
    pdf = lambda t: float(dens.pdf(np.array([[t]]))[0])
    probs = np.array([quad(pdf, a, b)[0] for a, b in zip(edges[:-1], edges[1:])])
    assert abs(probs.sum() - 1.0) < 1e-6
    expected = probs * len(X)
    band = 3 * np.sqrt(len(X) * probs * (1 - probs))
    assert np.all(np.abs(counts - expected) <= band)
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert stats.chi2.sf(chi2, df=len(counts) - 1) > 1e-3


@pytest.mark.parametrize("dens", [
    uniform_density(2),
    truncated_mixture_density(1, w0=0.3, sigma=0.15, mu=0.2),
    truncated_mixture_density(2, w0=0.6, sigma=0.25),
    product_polynomial_density([1.2, -0.7]),
])
def test_density_bounds_and_mass(dens):
    g = np.linspace(0, 1, 41)
    pts = np.array(np.meshgrid(*[g] * dens.dim)).reshape(dens.dim, -1).T
    vals = dens.pdf(pts)
    assert vals.min() >= dens.g_min - 1e-12 and vals.max() <= dens.g_max + 1e-12
    if dens.dim == 1:
        mass = quad(lambda t: float(dens.pdf(np.array([[t]]))[0]), 0, 1)[0]
        assert abs(mass - 1) < 1e-6
    samp = dens.sample(20_000, np.random.default_rng(0))
    assert samp.min() >= 0 and samp.max() <= 1
    sv = dens.pdf(samp)
    assert sv.min() >= dens.g_min - 1e-12 and sv.max() <= dens.g_max + 1e-12


def test_sampled_points_within_bounds_large():
    dens = truncated_mixture_density(1, w0=0.5, sigma=0.3)
    X = dens.sample(1_000_000, np.random.default_rng(5))
    v = dens.pdf(X)
    assert v.min() >= dens.g_min - 1e-12 and v.max() <= dens.g_max + 1e-12


def test_cosine_gradient_seminorm():
    grad2 = quad(lambda t: (math.pi * math.sin(math.pi * t)) ** 2, 0, 1)[0]
    assert abs(grad2 - math.pi**2 / 2) < 1e-10
    f = builtin_regression("cosine_neumann", k=1)
    assert abs(f.sobolev_M**2 - (0.5 + math.pi**2 / 2)) < 1e-12


def test_constant_and_bump():
    c = builtin_regression("constant")
    assert np.all(c(np.random.default_rng(0).random((7, 3))) == 1.0)
    assert c.lipschitz_of_fg == 0.0
    b = builtin_regression("bump_compact", s=2)
    edge = np.array([[0.0], [1.0], [1e-3], [1 - 1e-3]])
    assert np.all(b(edge) < 1e-100)
    assert b(np.array([[0.5]]))[0] == pytest.approx(1.0)


def test_errors():
    with pytest.raises(ValueError):
        builtin_regression("nope")
    with pytest.raises(ValueError):
        product_polynomial_density([2.5])
    with pytest.raises(ValueError):
        sample_cloud(uniform_density(1), zero_fn(), 1)
    with pytest.raises(ValueError):
        density_from_dict({"kind": "weird"})


def test_rejection_cap_reports():
    broken = truncated_mixture_density(1, w0=0.1, sigma=0.05)
    from dataclasses import replace
    bad = replace(broken, g_max=1e12)  # acceptance odds ~1e-12
    with pytest.raises(SamplerError):
        bad.sample(10, np.random.default_rng(0))


@given(st.floats(-1.9, 1.9), st.floats(-1.9, 1.9))
def test_polynomial_density_integrates_to_one(a, b):
    dens = product_polynomial_density([a, b])
    g = (np.arange(200) + 0.5) / 200
    pts = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    assert abs(dens.pdf(pts).mean() - 1.0) < 1e-9
