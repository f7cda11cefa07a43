import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcrwle.graph import UNNORMALIZED
from pcrwle.kernel import make_kernel
from pcrwle.lepski import LepskiGrid, build_grid, comparison_table, lepski_threshold, select
from pcrwle.sampler import builtin_regression, sample_cloud, uniform_density


def cloud(n=200, f="cosine_neumann", noise=0.5, seed=0):
    return sample_cloud(uniform_density(1), builtin_regression(f), n, noise_sd=noise, seed=seed)


def test_grid_block_stretch():
    g = build_grid(55, 1, 2, 0.5, 8.0)
    assert g.N_l == 4
    assert list(g.s) == [1, 1, 2, 2]
    assert np.allclose(np.diff(np.log(g.M)), math.log(16) / 3)
    assert g.M[0] == 0.5 and g.M[-1] == 8.0


def test_grid_degenerate_ranges():
    g = build_grid(1000, 1, 1, 0.2, 20.0)
    assert set(g.s) == {1} and len(set(g.M)) == g.N_l
    g = build_grid(1000, 1, 3, 2.0, 2.0)
    assert np.all(g.M == 2.0)
    with pytest.raises(ValueError):
        build_grid(1000, 2, 1, 1.0, 2.0)
    with pytest.raises(ValueError):
        build_grid(1000, 1, 2, 3.0, 2.0)


@given(st.integers(2, 10**7), st.integers(1, 4), st.integers(0, 3), st.floats(0.1, 3.0))
def test_grid_properties(n, s_min, span, c_grid):
    g = build_grid(n, s_min, s_min + span, 0.2, 20.0, c_grid)
    assert g.N_l == max(2, round(c_grid * math.log(n)))
    assert np.all(np.diff(g.s) >= 0) and np.all(np.diff(g.M) > 0)
    assert g.s[0] == s_min and g.s[-1] <= s_min + span


def test_threshold_formula():
    assert lepski_threshold(1, 1.0, 1000, 1) == pytest.approx((1000 / math.log(1000)) ** (-1 / 3))
    assert lepski_threshold(2, 2.0, 500, 1, c0=3.0) == pytest.approx(
        3 * 2 * (4 * 500 / math.log(500)) ** (-2 / 5))


def test_single_entry_grid_echoes():
    g = LepskiGrid(((2, 1.5),), 2, 2, 1.5, 1.5)
    sel = select(g, cloud(), UNNORMALIZED, make_kernel())
    assert sel.index == 0 and sel.s_hat == 2 and sel.M_hat == 1.5 and not sel.fallback
    rows = comparison_table(sel)
    assert len(rows) == 1 and rows[0]["distance"] == 0.0 and rows[0]["passed"]


def test_noiseless_constant_selects_last():
    c = cloud(f="constant", noise=0.0)
    g = build_grid(c.n, 1, 3, 0.2, 20.0)
    sel = select(g, c, UNNORMALIZED, make_kernel())
    assert sel.index == g.N_l - 1 and sel.s_hat == 3
    assert np.abs(sel.distances).max() < 1e-10


def test_table_symmetry_and_rule():
    sel = select(build_grid(300, 1, 3, 0.2, 20.0), cloud(300, noise=1.0), UNNORMALIZED, make_kernel())
    assert np.array_equal(sel.distances, sel.distances.T)
    rows = comparison_table(sel)
    assert len(rows) == sel.grid.N_l**2
    for j in range(sel.grid.N_l):
        mine = [r for r in rows if r["candidate"] == j and r["relevant"]]
        assert sel.admissible[j] == all(r["passed"] for r in mine)
    if not sel.fallback:
        assert sel.index == max(np.nonzero(sel.admissible)[0])


def test_fallback_when_nothing_admissible():
    # a tiny c0 makes every threshold fail
    sel = select(build_grid(300, 1, 3, 0.2, 20.0), cloud(300, noise=1.0), UNNORMALIZED,
                 make_kernel(), c0=1e-12)
    assert sel.fallback and sel.index == 0


def test_cache_reuse_bit_identical():
    g = build_grid(300, 1, 1, 1.0, 1.0)
    sel = select(g, cloud(300), UNNORMALIZED, make_kernel())
    assert sel.reused == tuple(range(1, g.N_l))
    base = sel.fits[0].fitted
    assert all(f.fitted.tobytes() == base.tobytes() for f in sel.fits)


def test_serialization():
    sel = select(build_grid(100, 1, 2, 0.5, 5.0), cloud(100), UNNORMALIZED, make_kernel())
    d = sel.to_dict()
    assert d["grid"]["pairs"][0] == [1, 0.5] and len(d["plans"]) == sel.grid.N_l
    with pytest.raises(ValueError):
        select(sel.grid, cloud(100), UNNORMALIZED, make_kernel(), c0=0.0)
