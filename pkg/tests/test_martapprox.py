import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpiso import coeffs as cf
from lpiso import innovations as inv
from lpiso import linproc as lp
from lpiso import martapprox as ma
from lpiso.errors import ConfigError
from lpiso.rng import stream

GAUSS = inv.iid_gaussian()
GEO = inv.causal_linear(("geometric", 0.5))
CHAIN = inv.two_state(0.9)
PSIS = [ma.power(1), ma.power(2), ma.power(3.5), ma.log_power(3), ma.log_power(2.5)]
PSI_IDS = ["x", "x2", "x3.5", "psi23", "psi2.5"]


# -- Orlicz functions -------------------------------------------------------------
@pytest.mark.parametrize("psi", PSIS, ids=PSI_IDS)
def test_psi_convex_increasing(psi):
    x = np.linspace(0, 20, 4001)
    y = psi(x)
    assert y[0] == 0.0
    assert np.all(np.diff(y) >= 0)
    assert np.all(np.diff(y, 2) >= -1e-9 * np.max(y))


@pytest.mark.parametrize("psi", [p for p in PSIS if p.kind != "power" or p.param >= 2],
                         ids=["x2", "x3.5", "psi23", "psi2.5"])
def test_psi_of_sqrt_convex(psi):
    x = np.linspace(0, 400, 4001)
    y = psi(np.sqrt(x))
    assert np.all(np.diff(y, 2) >= -1e-9 * np.max(y))


@pytest.mark.parametrize("psi", PSIS, ids=PSI_IDS)
def test_growth_class(psi):
    x = np.logspace(-3, 3, 200)
    for c in (2.0, 3.0, 10.0, 100.0):
        assert np.all(psi(c * x) <= c ** psi.growth_index * psi(x) * (1 + 1e-12))


@pytest.mark.parametrize("psi", PSIS, ids=PSI_IDS)
@pytest.mark.parametrize("y", [1e-6, 0.3, 1.0, 7.0, 2.0 ** 12, 1e9])
def test_inverse_roundtrip(psi, y):
    assert float(psi(psi.inverse(y))) == pytest.approx(y, rel=1e-10)


@pytest.mark.parametrize("psi", PSIS, ids=PSI_IDS)
def test_derivative_matches_finite_difference(psi):
    x = np.array([0.3, 1.0, 2.5])
    h = 1e-6
    fd = (psi(x + h) - psi(x - h)) / (2 * h)
    np.testing.assert_allclose(psi.derivative(x), fd, rtol=1e-6)


def test_orlicz_constructors_validate():
    with pytest.raises(ConfigError):
        ma.power(0.5)
    with pytest.raises(ConfigError):
        ma.log_power(2.0)


# -- empirical norms --------------------------------------------------------------------
def test_power_norm_is_empirical_q_norm(rng):
    x = rng.standard_normal(5000)
    for q in (1.0, 2.0, 3.0, 4.5):
        ref = np.mean(np.abs(x) ** q) ** (1 / q)
        assert ma.orlicz_norm(x, ma.power(q)) == pytest.approx(ref, rel=1e-6)


def test_constant_sample():
    assert ma.orlicz_norm(np.full(100, 3.0), ma.power(2)) == pytest.approx(3.0, rel=1e-12)


def test_zero_sample():
    assert ma.orlicz_norm(np.zeros(10), ma.log_power(3)) == 0.0


@pytest.mark.parametrize("psi", PSIS, ids=PSI_IDS)
@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_homogeneity(psi, c, rng):
    x = rng.standard_t(5, 3000)
    assert ma.orlicz_norm(c * x, psi) == pytest.approx(c * ma.orlicz_norm(x, psi), rel=1e-5)


@given(data=st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40),
       c=st.sampled_from([0.5, 2.0, 10.0]))
def test_homogeneity_property(data, c):
    x = np.asarray(data)
    base = ma.orlicz_norm(x, ma.log_power(3))
    assert ma.orlicz_norm(c * x, ma.log_power(3)) == pytest.approx(c * base, rel=1e-5,
                                                                    abs=1e-300)


def test_log_power_reproducible_across_seeds():
    vals = [ma.orlicz_norm(stream(s, "orlicz").standard_normal(10 ** 6), ma.log_power(3))
            for s in range(3)]
    assert max(vals) / min(vals) - 1 < 0.02


def test_norm_definition_met(rng):
    x = rng.standard_normal(2000)
    psi = ma.log_power(3)
    c = ma.orlicz_norm(x, psi)
    assert np.mean(psi(np.abs(x) / c)) == pytest.approx(1.0, abs=1e-9)


def test_norm_standard_error_positive(rng):
    c, se = ma.orlicz_norm(rng.standard_normal(10 ** 4), ma.power(2), with_se=True)
    assert 0 < se < 0.02 * c


# -- moment inequality -----------------------------------------------------------------
def test_moment_constant():
    assert ma.moment_constant(2) == pytest.approx(math.sqrt(18 * 2 ** 1.5), rel=1e-14)
    assert ma.moment_constant(2) == pytest.approx(7.14, abs=0.01)
    with pytest.raises(ConfigError):
        ma.moment_constant(1.5)


def test_projection_sums():
    assert ma.projection_sum(GAUSS, 2) == pytest.approx(1.0)
    assert ma.projection_sum(GEO, 2) == pytest.approx(2.0, rel=1e-12)
    assert ma.projection_sum(CHAIN, 2) == pytest.approx(3.0, rel=1e-12)


def test_moment_inequality_dirac():
    rows = ma.verify_moment_inequality(cf.dirac(), GAUSS, [1, 16, 256], 2.0, seed=1)
    for r in rows:
        assert r.verdict == "pass"
        assert r.rhs == pytest.approx(ma.moment_constant(2) * math.sqrt(r.n), rel=1e-12)
        assert r.ratio == pytest.approx(1 / ma.moment_constant(2), rel=0.05)


def test_moment_inequality_chain():
    rows = ma.verify_moment_inequality(cf.dirac(), CHAIN, [1024], 2.0, seed=2)
    assert rows[0].verdict == "pass"
    assert rows[0].lhs / math.sqrt(1024) == pytest.approx(3.0, rel=0.05)
    assert rows[0].extra["D_q"] == pytest.approx(3.0, rel=1e-12)


@pytest.mark.parametrize("coeff", [cf.fractional(0.25), cf.power_diff(0.25),
                                   cf.alternating_heyde()], ids=lambda m: m.kind)
@pytest.mark.parametrize("innov,q", [(GAUSS, 2.0), (GEO, 4.0), (inv.iid_student_t(6), 3.0)],
                         ids=["gauss", "geo", "t6"])
def test_moment_inequality_matrix(coeff, innov, q):
    rows = ma.verify_moment_inequality(coeff, innov, [1, 64, 1024], q, seed=3)
    assert all(r.verdict == "pass" for r in rows)


def test_moment_inequality_single_term():
    coeff = cf.finite_ma([1.0, 0.5])
    rows = ma.verify_moment_inequality(coeff, GAUSS, [1], 2.0, seed=4)
    assert rows[0].rhs == pytest.approx(ma.moment_constant(2) * math.sqrt(1.25), rel=1e-10)


def test_moment_inequality_guards():
    with pytest.raises(ConfigError):
        ma.verify_moment_inequality(cf.dirac(), GAUSS, [4], 2.0, reps=100)
    with pytest.raises(ConfigError):
        ma.verify_moment_inequality(cf.dirac(), inv.iid_student_t(5), [4], 6.0)


# -- dyadic maximal bound ---------------------------------------------------------------
def test_dyadic_zero_paths():
    lhs, rhs, se = ma.dyadic_max_bound(np.zeros((10, 8)), ma.power(1), 2, 3)
    assert (lhs, rhs) == (0.0, 0.0)


def test_dyadic_needs_three_levels():
    with pytest.raises(ConfigError):
        ma.dyadic_max_bound(np.zeros((10, 4)), ma.power(1), 2, 2)


def test_dyadic_identity_form():
    # with Psi(x) = x the bound is sum_L ||S_{2^L}||_2 2^{(N-L)/2}
    N = 6
    paths = lp.simulate_paths(cf.fractional(0.25), GAUSS, 2 ** N, 3000, seed=5).S
    _, rhs, _ = ma.dyadic_max_bound(paths, ma.power(1), 2, N)
    ref = sum(math.sqrt(np.mean(paths[:, 2 ** L - 1] ** 2)) * 2 ** ((N - L) / 2)
              for L in range(N + 1))
    assert rhs == pytest.approx(ref, rel=1e-9)


def test_dyadic_dirac_closed_form():
    N = 12
    paths = lp.simulate_paths(cf.dirac(), GAUSS, 2 ** N, 10 ** 4, seed=6).S
    lhs, rhs, se = ma.dyadic_max_bound(paths, ma.power(1), 2, N)
    assert rhs == pytest.approx((N + 1) * 2 ** (N / 2), rel=0.02)
    assert lhs <= 2 * 2 ** (N / 2)
    assert ma.one_sided_verdict(lhs, rhs, se) == "pass"


@pytest.mark.parametrize("seed", range(5))
def test_dyadic_log_power_fractional(seed):
    N = 12
    paths = lp.simulate_paths(cf.fractional(0.25), GAUSS, 2 ** N, 2000, seed=seed,
                              purpose="dyadic").S
    lhs, rhs, se = ma.dyadic_max_bound(paths, ma.log_power(3), 2, N)
    assert lhs <= rhs


# -- martingale approximation ---------------------------------------------------------
def test_approx_iid_is_zero():
    rep = ma.verify_martingale_approx(cf.fractional(0.25), GAUSS, [64, 256, 1024],
                                      [1, 4], reps=200)
    assert np.all(rep.diff_norm == 0) and np.all(rep.max_ratio == 0)


def test_approx_harmonic_linear_decreasing():
    rep = ma.verify_martingale_approx(cf.harmonic(), GEO, [2 ** 8, 2 ** 10, 2 ** 12],
                                      [1, 4, 16], reps=2000, seed=7)
    assert rep.decreasing
    assert set(rep.fits) == {1, 2}


def test_approx_chain_dirac_coboundary_rate():
    rep = ma.verify_martingale_approx(cf.dirac(), CHAIN, [2 ** 8, 2 ** 10, 2 ** 12],
                                      [1, 4], reps=2000, seed=8)
    # S_n - T_n = 4 (f(Y_0) - f(Y_n)) is bounded by 8, so the ratio halves per 4x n
    assert np.all(rep.diff_norm <= 8.0)
    ratios = rep.max_ratio[1:] / rep.max_ratio[:-1]
    np.testing.assert_allclose(ratios, 0.5, rtol=1e-12)


# -- coboundary identity ------------------------------------------------------------------
def test_coboundary_finite_ma():
    res = ma.coboundary_check(cf.finite_ma([1.0, 1.0]), GEO, 1024, seed=1)
    assert res.A == 2.0
    assert res.residual <= 1e-12
    assert res.ok


def test_coboundary_dirac():
    res = ma.coboundary_check(cf.dirac(), GEO, 512)
    assert res.residual == 0.0 and res.A == 1.0


def test_coboundary_alternating():
    res = ma.coboundary_check(cf.alternating_heyde(p=0.8), GEO, 1024, seed=2)
    assert res.ok
    assert res.residual == pytest.approx(res.predicted, rel=1e-6, abs=1e-12)


def test_coboundary_refuses_without_summability():
    with pytest.raises(ConfigError):
        ma.coboundary_check(cf.harmonic(), GEO, 64)
    with pytest.raises(ConfigError):
        ma.coboundary_check(cf.fractional(0.25), GEO, 64)


# -- series lemma ---------------------------------------------------------------------
def test_lemma_zero_sequence():
    res = ma.lemma61_check(np.ones(100), np.zeros(100), 2.0)
    assert (res.lhs, res.rhs) == (0.0, 0.0) and res.holds


def test_lemma_geometric_closed_form():
    n = np.arange(1, 61, dtype=float)
    u = 2.0 ** -n
    res = ma.lemma61_check(np.ones_like(u), u, 2.0)
    assert res.lhs == pytest.approx(1.0, rel=1e-15)
    # sum_{k>=n} 4^-k = 4^-n * 4/3
    rhs = float(np.sum(np.sqrt((4.0 ** -n) * (4 / 3) / n)))
    assert res.rhs == pytest.approx(rhs, rel=1e-10)
    assert res.constant == pytest.approx(math.sqrt(2), rel=1e-12)
    assert res.holds


def test_lemma_chain_log_weights():
    u = inv.projection_norms(CHAIN, 400, 2.0)[1:]
    n = np.arange(1, 401, dtype=float)
    res = ma.lemma61_check(np.log1p(n), u, 2.0, "log")
    assert res.lhs == pytest.approx(float(np.sum(np.log1p(n) * 0.6 * 0.8 ** n)), rel=1e-12)
    assert res.holds


@given(u=st.lists(st.floats(0, 10), min_size=1, max_size=60),
       q=st.sampled_from([1.5, 2.0, 3.0]))
def test_lemma_holds_for_nonincreasing_u(u, q):
    u = np.sort(np.asarray(u))[::-1]
    assert ma.lemma61_check(np.ones_like(u), u, q).holds


def test_lemma_constant_hypothesis_grid():
    # C_q = 2^{1/p} max(alpha, 1) with alpha = 2 / p for b = 1
    assert ma.lemma_constant(2.0) == pytest.approx(math.sqrt(2))
    assert ma.lemma_constant(4.0) == pytest.approx(2 ** 0.75 * 1.5)
    assert ma.lemma_constant(1.5) == pytest.approx(2 ** (1 / 3))
    assert ma.lemma_constant(2.0, "log") >= ma.lemma_constant(2.0)
