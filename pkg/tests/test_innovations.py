import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpiso import innovations as inv
from lpiso.errors import ConfigError
from lpiso.rng import stream

CHAIN = inv.two_state(0.9)
GEO = inv.causal_linear(("geometric", 0.5))
MODELS = [inv.iid_gaussian(), inv.iid_student_t(6.0), GEO,
          inv.causal_linear([1.0, -0.4, 0.2]), CHAIN,
          inv.markov_functional([[0.5, 0.3, 0.2], [0.1, 0.6, 0.3], [0.3, 0.3, 0.4]],
                                [2.0, -1.0, 0.5])]
IDS = ["gauss", "t6", "geo", "finite", "chain", "chain3"]


# -- construction ----------------------------------------------------------------
def test_chain_centred_and_stationary():
    for model in (CHAIN, MODELS[-1]):
        ch = model.chain
        assert abs(ch.pi @ ch.f) < 1e-15
        np.testing.assert_allclose(ch.pi @ ch.P, ch.pi, atol=1e-15)
        assert ch.pi.sum() == pytest.approx(1.0, abs=1e-15)


def test_reducible_chain_rejected():
    with pytest.raises(ConfigError):
        inv.markov_functional([[1.0, 0.0], [0.0, 1.0]], [1.0, -1.0])
    with pytest.raises(ConfigError):
        inv.markov_functional([[0.0, 1.0], [1.0, 0.0]], [1.0, -1.0])


@pytest.mark.parametrize("build", [lambda: inv.iid_student_t(4.0),
                                   lambda: inv.causal_linear(("geometric", 1.0)),
                                   lambda: inv.iid_gaussian(0.0),
                                   lambda: inv.from_config({"kind": "nope"})])
def test_bad_parameters_rejected(build):
    with pytest.raises(ConfigError):
        build()


def test_moment_order_guard():
    t = inv.iid_student_t(5.0)
    assert t.moment_order_max == pytest.approx(4.99)
    with pytest.raises(ConfigError):
        inv.projection_norm(t, 0, 5.0)


# -- sampler sanity --------------------------------------------------------------------
def test_gaussian_mean_band():
    x = inv.sample_window(inv.iid_gaussian(), 1, 10 ** 6, stream(1, "test"))
    assert abs(x.mean()) <= 4 / math.sqrt(10 ** 6)


def test_linear_lag_one_autocovariance():
    assert inv.autocovariance(GEO, 1) == pytest.approx(2 / 3, rel=1e-14)
    x = inv.sample_path(GEO, 0, 199999, stream(2, "test")).xi[0]
    assert np.mean(x[1:] * x[:-1]) == pytest.approx(2 / 3, abs=0.05)


@pytest.mark.parametrize("k", [0, 1, 2, 5, 10])
def test_chain_autocovariance(k):
    assert inv.autocovariance(CHAIN, k) == pytest.approx(0.8 ** k, rel=1e-12)


def test_chain_sampler_autocovariance():
    x = inv.sample_path(CHAIN, 0, 199999, stream(3, "test")).xi[0]
    for k in (1, 3):
        assert np.mean(x[k:] * x[:-k]) == pytest.approx(0.8 ** k, abs=0.03)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_sampler_variance(model):
    path = inv.sample_path(model, 0, 49999, stream(4, "var"), reps=4)
    assert np.var(path.xi) == pytest.approx(inv.autocovariance(model, 0), rel=0.06)


# -- projections ---------------------------------------------------------------------
def test_iid_projections():
    g = inv.iid_gaussian()
    assert inv.projection_norm(g, 0, 2) == pytest.approx(1.0)
    assert inv.projection_norm(g, 3, 2) == 0.0


def test_chain_projection_norms():
    j = np.arange(1, 30)
    np.testing.assert_allclose(inv.projection_norms(CHAIN, 29, 2.0)[1:], 0.6 * 0.8 ** j,
                               rtol=1e-12)
    assert inv.projection_norm(CHAIN, 0, 2.0) == pytest.approx(0.6, rel=1e-12)


def test_linear_projection_norms():
    np.testing.assert_allclose(inv.projection_norms(GEO, 20, 2.0), 0.5 ** np.arange(21),
                               rtol=1e-14)


@given(q=st.floats(1.0, 6.0))
def test_linear_projection_homogeneity(q):
    norms = inv.projection_norms(GEO, 10, q)
    np.testing.assert_allclose(norms / norms[0], 0.5 ** np.arange(11), rtol=1e-12)
    assert norms[0] == pytest.approx(inv.gaussian_abs_moment(q), rel=1e-12)


def test_gaussian_abs_moment_known_values():
    assert inv.gaussian_abs_moment(2) == pytest.approx(1.0, rel=1e-14)
    assert inv.gaussian_abs_moment(4) == pytest.approx(3 ** 0.25, rel=1e-14)
    assert inv.gaussian_abs_moment(1) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-14)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_projection_norms_nonnegative(model):
    norms = inv.projection_norms(model, 64, 2.0)
    assert np.all(norms >= 0)
    assert norms[-1] < 1e-5


def test_finite_filter_projections_vanish():
    norms = inv.projection_norms(MODELS[3], 10, 2.0)
    assert np.all(norms[3:] == 0.0)


def test_chain_projection_orthogonality():
    for model in (CHAIN, MODELS[-1]):
        for i in range(6):
            for j in range(6):
                assert abs(inv.projection_cross(model, i, j)) < 1e-12


def test_conditional_norms():
    np.testing.assert_allclose(inv.conditional_norms(CHAIN, 20, 2.0), 0.8 ** np.arange(21),
                               rtol=1e-12)
    n = np.arange(21)
    np.testing.assert_allclose(inv.conditional_norms(GEO, 20, 2.0),
                               0.5 ** n * math.sqrt(4 / 3), rtol=1e-12)


# -- long-run variance ---------------------------------------------------------------
def test_eta_values():
    assert inv.eta(inv.iid_gaussian(2.0)) == 4.0
    assert inv.eta(GEO) == pytest.approx(4.0, rel=1e-15)
    assert inv.eta(CHAIN) == pytest.approx(9.0, abs=1e-12)


def test_eta_two_routes():
    assert abs(inv.eta_poisson(CHAIN) - 9.0) <= 1e-10
    assert abs(inv.eta_covariance_series(CHAIN) - 9.0) <= 1e-10
    m = MODELS[-1]
    assert inv.eta_poisson(m) == pytest.approx(inv.eta_covariance_series(m), rel=1e-10)


@given(p=st.floats(0.05, 0.95))
def test_eta_two_state_closed_form(p):
    # lambda = 2p - 1; eta = (1 + lambda) / (1 - lambda)
    lam = 2 * p - 1
    model = inv.two_state(p)
    assert inv.eta_poisson(model) == pytest.approx((1 + lam) / (1 - lam), rel=1e-9)
    assert inv.eta_covariance_series(model) == pytest.approx((1 + lam) / (1 - lam),
                                                             rel=1e-9)


def test_chain_poisson_solution():
    ch = CHAIN.chain
    np.testing.assert_allclose(ch.h, 5 * ch.f, rtol=1e-12)


# -- martingale differences ---------------------------------------------------------
def test_iid_difference_is_innovation():
    path = inv.sample_path(inv.iid_gaussian(), 0, 99, stream(5, "test"))
    assert np.array_equal(path.d, path.xi)


def test_linear_difference():
    path = inv.sample_path(GEO, 0, 999, stream(6, "test"))
    np.testing.assert_allclose(path.d, 2.0 * path.state, rtol=1e-15)


def test_chain_difference():
    path = inv.sample_path(CHAIN, 0, 999, stream(7, "test"))
    f = CHAIN.chain.f
    y = path.state[0]
    d = path.d[0]
    np.testing.assert_allclose(d[1:], 5 * f[y[1:]] - 4 * f[y[:-1]], atol=1e-13)


@pytest.mark.parametrize("model", [GEO, CHAIN, MODELS[-1]], ids=["geo", "chain", "chain3"])
def test_martingale_property(model):
    path = inv.sample_path(model, 0, 10 ** 5, stream(8, "mart"))
    d = path.d[0, 1:]
    if model.kind == "markov":
        prev = path.state[0, :-1]
        groups = [d[prev == s] for s in np.unique(prev)]
    else:
        prev = path.state[0, :-1]
        groups = [d[prev < 0], d[prev >= 0]]
    for g in groups:
        assert abs(g.mean()) <= 4 * g.std(ddof=1) / math.sqrt(g.size)


def test_chain_variance_of_difference():
    path = inv.sample_path(CHAIN, 0, 10 ** 6, stream(9, "test"))
    d = path.d[0]
    se = d.var() * math.sqrt(2.0 / d.size) * 3
    assert abs(d.var() - 9.0) <= 4 * se


# -- condition series ---------------------------------------------------------------
def test_iid_series_single_term():
    rep = inv.condition_series(inv.iid_gaussian(), 2.0)
    assert rep.series["proj_sum"][0] == pytest.approx(1.0)
    assert np.count_nonzero(rep.terms["proj_sum"][1]) == 1


def test_chain_series():
    rep = inv.condition_series(CHAIN, 2.0)
    total, tail, verdict = rep.series["proj_sum"]
    assert total + tail == pytest.approx(3.0, rel=1e-10)
    assert verdict == "satisfied"
    assert rep.series["cond12_fwd"][2] == "satisfied"
    n = np.arange(1, 2000)
    ref = float(np.sum(0.8 ** n / np.sqrt(n)))
    assert rep.series["cond12_fwd"][0] + rep.series["cond12_fwd"][1] == pytest.approx(
        ref, rel=1e-9)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
def test_finite_conditions_imply_finite_projection_sum(model):
    rep = inv.condition_series(model, 2.0)
    if all(rep.series[s][2] == "satisfied" for s in ("cond12_fwd", "cond12_bwd")):
        total, tail, _ = rep.series["proj_sum"]
        assert math.isfinite(total + tail)
    assert all(r.holds for r in rep.lemma.values())


def test_report_rows_per_series():
    rep = inv.condition_series(GEO, 2.0)
    rows = list(rep.rows("geo"))
    proj = [r for r in rows if r[5] == "proj_sum"]
    assert proj[0][2] == 0 and proj[0][4] == pytest.approx(1.0)
    assert proj[-1][4] == pytest.approx(2.0, rel=1e-12)
