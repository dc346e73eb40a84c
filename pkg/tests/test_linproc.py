import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpiso import coeffs as cf
from lpiso import innovations as inv
from lpiso import linproc as lp
from lpiso.harness import stats as hs

GAUSS = inv.iid_gaussian()
GEO = inv.causal_linear(("geometric", 0.5))
CHAIN = inv.two_state(0.9)


@pytest.mark.parametrize("coeff", [cf.dirac(), cf.finite_ma([1.0, -0.5, 0.25]),
                                   cf.fractional(0.25), cf.power_diff(0.25),
                                   cf.alternating_heyde(), cf.harmonic()],
                         ids=lambda m: m.kind)
@pytest.mark.parametrize("innov", [GAUSS, GEO, CHAIN], ids=["gauss", "geo", "chain"])
def test_two_routes_to_partial_sums(coeff, innov):
    n = 300
    path = lp.simulate_path(coeff, innov, n, [1.0], seed=11)
    for k in (1, 2, 17, 150, n):
        direct = lp.linear_statistic(coeff, path, k)
        assert path.S[0, k - 1] == pytest.approx(direct, rel=1e-8, abs=1e-10)


def test_dirac_gaussian_is_random_walk():
    n, reps = 1000, 10 ** 4
    path = lp.simulate_paths(cf.dirac(), GAUSS, n, reps, seed=1, grid=[1.0])
    assert 0.9 <= np.var(path.S[:, -1]) / n <= 1.1


@pytest.mark.parametrize("coeff", [cf.fractional(0.25), cf.harmonic()], ids=lambda m: m.kind)
def test_iid_martingale_sums_coincide(coeff):
    path = lp.simulate_paths(coeff, GAUSS, 256, 20, seed=2, with_martingale=True)
    assert np.array_equal(path.S, path.T)


def test_linear_innovations_approximation():
    n = 2 ** 12
    path = lp.simulate_paths(cf.dirac(), GEO, n, 2000, seed=3, grid=[1.0],
                             with_martingale=True)
    ratio = math.sqrt(np.mean((path.S[:, -1] - path.T[:, -1]) ** 2)) / math.sqrt(n)
    assert ratio < 0.15


def test_max_statistics_deterministic():
    m, msq, diff = lp.max_statistics(np.array([1.0, -3.0, 2.0]))
    assert m[0] == 3.0 and msq[0] == 9.0 and diff is None


def test_doob_band():
    n = 2 ** 10
    path = lp.simulate_paths(cf.dirac(), GAUSS, n, 10 ** 4, seed=4)
    _, msq, _ = lp.max_statistics(path.S)
    assert np.mean(msq) / n <= 4.0


def test_fractional_max_ratio_bounded():
    ratios = []
    for n in (2 ** 8, 2 ** 10, 2 ** 12, 2 ** 14):
        path = lp.simulate_paths(cf.fractional(0.25), GAUSS, n, 2000, seed=5,
                                 purpose=f"maxsq-{n}")
        ratios.append(np.mean(lp.max_statistics(path.S)[1]) / cf.v2(cf.fractional(0.25), n))
    assert cf.trend_verdict(ratios, "bounded") != "violated"
    assert max(ratios) < 4.0


@pytest.mark.parametrize("coeff", [cf.dirac(), cf.fractional(0.25)], ids=lambda m: m.kind)
def test_exact_gaussian_law(coeff):
    n = 256
    results = []
    for m in range(hs.META_RUNS):
        path = lp.simulate_paths(coeff, GAUSS, n, 5000, seed=6, grid=[1.0],
                                 purpose=f"gauss-{m}")
        results.append(hs.ks_one_sample(path.S[:, -1] / path.normalizer[1],
                                        hs.normal_cdf(1.0)))
    assert sum(r.passed for r in results) >= 19


def test_empirical_covariance_matches_deterministic():
    coeff, n, reps = cf.fractional(0.25), 1024, 20000
    path = lp.simulate_paths(coeff, GAUSS, n, reps, seed=7, grid=[0.3, 0.9])
    x = path.at_grid("S") / path.normalizer[1]
    prod = x[:, 0] * x[:, 1]
    det, _ = cf.covariance_limit(coeff, n, 0.3, 0.9, 1.5)
    assert abs(prod.mean() - det) <= 4 * prod.std(ddof=1) / math.sqrt(reps)


@pytest.mark.parametrize("innov", [GAUSS, GEO, CHAIN], ids=["gauss", "geo", "chain"])
def test_variance_ratio_approaches_eta(innov):
    n, reps = 4096, 4000
    path = lp.simulate_paths(cf.dirac(), innov, n, reps, seed=8, grid=[1.0])
    x = path.S[:, -1] / path.normalizer[1]
    var = np.var(x, ddof=1)
    se = math.sqrt(np.mean((x - x.mean()) ** 4) - var ** 2) / math.sqrt(reps)
    assert abs(var - inv.eta(innov)) <= 3 * se


def test_reproducible_across_workers():
    kw = dict(seed=9, grid=[0.5, 1.0], with_martingale=True)
    a = lp.simulate_paths(cf.fractional(0.25), CHAIN, 512, 700, workers=1, **kw)
    b = lp.simulate_paths(cf.fractional(0.25), CHAIN, 512, 700, workers=3, **kw)
    assert np.array_equal(a.S, b.S) and np.array_equal(a.T, b.T)
    c = lp.simulate_paths(cf.fractional(0.25), CHAIN, 512, 700, workers=1, **kw)
    assert np.array_equal(a.S, c.S)


def test_at_grid_floor_convention():
    path = lp.simulate_paths(cf.dirac(), GAUSS, 10, 3, seed=10, grid=[0.05, 0.25, 1.0])
    vals = path.at_grid("S")
    assert np.all(vals[:, 0] == 0.0)
    np.testing.assert_array_equal(vals[:, 1], path.S[:, 1])
    np.testing.assert_array_equal(vals[:, 2], path.S[:, 9])


def test_normalizer_stored():
    path = lp.simulate_paths(cf.harmonic(), GAUSS, 64, 2, seed=0, normalizer="s_n")
    assert path.normalizer == ("s_n", math.sqrt(cf.s_squared(cf.harmonic(), 64)))


@given(n=st.integers(1, 40), seed=st.integers(0, 2 ** 31))
def test_increments_recover_filter(n, seed):
    coeff = cf.finite_ma([1.0, 2.0])
    path = lp.simulate_path(coeff, GAUSS, n, [1.0], seed)
    j_lo, xi, _ = path.xi_window
    x = xi[0][-n:] + 2 * xi[0][-n - 1:-1]
    np.testing.assert_allclose(path.X[0], x, rtol=1e-12, atol=1e-12)
