"""Experiment drivers behind the CLI subcommands.

Each ``run_*`` function returns an :class:`ExperimentResult` holding a CSV
header, rows and a dict of named boolean verdicts.  Nothing here writes
files; :mod:`lpiso.harness.cli` does the I/O.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .. import coeffs as cf
from .. import fbmlab as fb
from .. import innovations as inv
from .. import isotone as iso
from .. import linproc as lp
from .. import martapprox as ma
from ..errors import ConfigError
from ..rng import stream
from . import rates
from . import stats as st

BETA_TOL = 0.05
COV_TOL = 0.05
SLOPE_TOL = 0.1
COV_PAIRS = ((0.2, 0.4), (0.3, 0.9), (0.5, 0.5), (0.5, 1.0), (0.7, 0.8))


@dataclass
class ExperimentResult:
    header: tuple
    rows: list
    verdicts: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.verdicts.values())


def dyadic_grid(lo, hi):
    """Powers of two between lo and hi inclusive."""
    lo, hi = int(lo), int(hi)
    if lo < 1 or hi < lo:
        raise ConfigError("need 1 <= lo <= hi")
    k0 = math.ceil(math.log2(lo))
    return [1 << k for k in range(k0, int(math.floor(math.log2(hi))) + 1)]


# -- normalizers ----------------------------------------------------------------
def run_normalizers(coeff, n_grid):
    """v_n^2, s_n^2 and the fitted beta.

    The beta verdict is |beta_hat - beta| <= 0.05 when the slowly varying
    factor is asymptotically constant; otherwise it asks that the local
    slopes move toward beta along the grid.
    """
    est = cf.beta_estimate(coeff, n_grid)
    rows = []
    for n, v in zip(est.n_grid, est.v2):
        rows.append((coeff.kind, coeff.describe(), int(n), float(v),
                     float(cf.s_squared(coeff, int(n))), est.beta_hat))
    verdicts = {}
    beta = coeff.analytic_beta
    if beta is not None:
        if coeff.analytic_h == "constant" or coeff.kind == "fractional":
            verdicts["beta_hat"] = abs(est.beta_hat - beta) <= BETA_TOL
        else:
            gaps = np.abs(est.local_slopes - beta)
            verdicts["beta_trend"] = bool(gaps[-1] < gaps[0])
    summary = {"beta_hat": est.beta_hat, "analytic_beta": beta,
               "local_slopes": est.local_slopes.tolist(),
               "ratios": {str(k): v for k, v in est.ratios.items()}}
    return ExperimentResult(("kind", "params", "n", "v2", "s2", "beta_hat"), rows,
                            verdicts, summary)


def run_cov_limit(coeff, n, beta, pairs=COV_PAIRS):
    """Deterministic covariance ratio against the fBm covariance."""
    rows, ok = [], True
    for s, t in pairs:
        val, target = cf.covariance_limit(coeff, n, s, t, beta)
        diff = abs(val - target)
        ok &= diff <= COV_TOL
        rows.append((coeff.kind, coeff.describe(), int(n), s, t, val, target, diff))
    return ExperimentResult(("kind", "params", "n", "s", "t", "ratio", "target",
                             "abs_diff"), rows, {"covariance": bool(ok)})


# -- simulation -----------------------------------------------------------------
def run_simulate(coeff, innov, n, reps, seed, grid, normalizer="v_n", workers=1):
    path = lp.simulate_paths(coeff, innov, n, reps, seed, grid, True, normalizer,
                             purpose="simulate", workers=workers)
    scale = path.normalizer[1]
    S = path.at_grid("S") / scale
    T = path.at_grid("T") / scale
    rows = [(r, float(t), float(S[r, i]), float(T[r, i]))
            for r in range(reps) for i, t in enumerate(path.grid)]
    return ExperimentResult(("rep", "t", "S_scaled", "T_scaled"), rows,
                            summary={"normalizer": path.normalizer[0], "value": scale})


def array_diagnostics(coeff, n):
    """(max_j |c_{n,j}| / v_n, sum_j (c_{n,j} - c_{n,j-1})^2 / v_n^2) over the
    explicit window."""
    ws = cf.window_sums(coeff, n)
    v2 = cf.v_squared(ws)
    c = np.concatenate(([0.0], ws.c, [0.0])) if coeff.finite_support else ws.c
    return (float(np.max(np.abs(ws.c)) / math.sqrt(v2)),
            float(np.sum(np.diff(c) ** 2) / v2))


def fclt_reference_sd(coeff, innov, n, t):
    """sd of the limit law of v_n^-1 S_[nt].

    IID Gaussian innovations: the exact finite-n value sigma v_[nt] / v_n.
    Otherwise the fBm marginal sqrt(eta) t^{beta/2}.
    """
    if innov.kind == "iid_gaussian":
        k = int(math.floor(n * t + 1e-9))
        return innov.param("sigma") * math.sqrt(cf.v2(coeff, k) / cf.v2(coeff, n))
    beta = coeff.analytic_beta
    if beta is None:
        raise ConfigError("non-Gaussian reference needs a model with known beta")
    return math.sqrt(inv.eta(innov)) * t ** (beta / 2)


def run_fclt(coeff, innov, n, reps, seed, grid=(1.0,), meta_runs=st.META_RUNS,
             workers=1):
    """KS of v_n^-1 S_[nt] against its Gaussian reference, per t, wrapped in
    independent meta-runs; plus the deterministic array diagnostics."""
    grid = np.asarray(grid, dtype=float)
    sds = [fclt_reference_sd(coeff, innov, n, t) for t in grid]
    results = {float(t): [] for t in grid}
    rows = []
    for m in range(meta_runs):
        path = lp.simulate_paths(coeff, innov, n, reps, seed, grid,
                                 purpose=f"fclt-meta{m}", workers=workers)
        vals = path.at_grid("S") / path.normalizer[1]
        for i, t in enumerate(grid):
            res = st.ks_one_sample(vals[:, i], st.normal_cdf(sds[i]))
            results[float(t)].append(res)
            rows.append((m, float(t), res.statistic, res.critical, sds[i],
                         "pass" if res.passed else "fail"))
    verdicts = {f"ks_t={t:g}": st.meta_verdict(r).passed for t, r in results.items()}
    diag = {k: array_diagnostics(coeff, k) for k in (max(1, n // 16), max(1, n // 4), n)}
    summary = {"meta_passes": {str(t): st.meta_verdict(r).passes for t, r in results.items()},
               "meta_runs": meta_runs,
               "max_c_over_v": {str(k): v[0] for k, v in diag.items()},
               "sum_dc2_over_v2": {str(k): v[1] for k, v in diag.items()}}
    return ExperimentResult(("meta_run", "t", "ks_stat", "ks_critical", "ref_sd",
                             "verdict"), rows, verdicts, summary)


def variance_ratio_check(coeff, innov, n, reps, seed, workers=1):
    """Empirical Var(S_n) / v_n^2 with a standard error, for comparison with
    eta."""
    path = lp.simulate_paths(coeff, innov, n, reps, seed, [1.0],
                             purpose="variance", workers=workers)
    x = path.S[:, -1] / path.normalizer[1]
    var = float(np.var(x, ddof=1))
    m4 = float(np.mean((x - x.mean()) ** 4))
    se = math.sqrt(max(m4 - var ** 2, 0.0) / reps)
    return var, se


# -- approximation and inequalities ---------------------------------------------
def run_approx(coeff, innov, n_grid, m_grid, reps, seed):
    rep = ma.verify_martingale_approx(coeff, innov, n_grid, m_grid, reps=reps, seed=seed)
    rows = [(int(n), float(d), float(ds), float(r), float(rs)) for n, d, ds, r, rs in
            zip(rep.n_grid, rep.diff_norm, rep.diff_se, rep.max_ratio, rep.max_ratio_se)]
    trivial = bool(np.all(rep.max_ratio == 0))
    summary = {"fits": {f"exponent_{e}": {"C1": c1, "C2": c2, "holdout_ok": h}
                        for e, (c1, c2, h) in rep.fits.items()},
               "trivial": trivial}
    return ExperimentResult(("n", "norm_S_minus_T", "norm_se", "max_ratio",
                             "max_ratio_se"), rows,
                            {"ratio_decreasing": rep.decreasing or trivial}, summary)


INEQ_HEADER = ("check", "n", "lhs", "rhs", "ratio", "verdict")


def _ineq_row(check, n, lhs, rhs, verdict):
    ratio = lhs / rhs if rhs and math.isfinite(rhs) and rhs > 0 else (
        0.0 if lhs == 0 else math.nan)
    return (check, int(n), float(lhs), float(rhs), float(ratio), verdict)


def orlicz_family(name):
    table = {"x": ma.power(1), "x2": ma.power(2), "psi23": ma.log_power(3)}
    if name not in table:
        raise ConfigError(f"unknown Orlicz function {name!r}; use x, x2 or psi23")
    return table[name]


def run_ineq(check, coeff, innov, n_grid=(), q=2.0, N=12, p=2.0,
             psi_names=("x", "x2", "psi23"), reps=ma.MIN_SAMPLES, seed=0,
             m_grid=(1, 4, 16)):
    """One of the inequality audits; every row carries a one-sided verdict."""
    rows, verdicts, summary = [], {}, {}
    if check == "moment":
        out = ma.verify_moment_inequality(coeff, innov, list(n_grid), q, reps, seed)
        for r in out:
            rows.append(_ineq_row("moment", r.n, r.lhs, r.rhs, r.verdict))
        verdicts["moment"] = all(r.verdict == "pass" for r in out)
        summary = {"C_q": ma.moment_constant(q), "D_q": ma.projection_sum(innov, q)}
    elif check == "dyadic":
        path = lp.simulate_paths(coeff, innov, 2 ** N, reps, seed, [1.0],
                                 purpose="dyadic")
        ok = True
        for name in psi_names:
            lhs, rhs, se = ma.dyadic_max_bound(path.S, orlicz_family(name), p, N)
            verdict = ma.one_sided_verdict(lhs, rhs, se)
            ok &= verdict == "pass"
            rows.append(_ineq_row(f"dyadic_{name}", N, lhs, rhs, verdict))
        verdicts["dyadic"] = ok
    elif check == "maxsq":
        ratios = []
        for n in n_grid:
            path = lp.simulate_paths(coeff, innov, int(n), reps, seed, [1.0],
                                     purpose=f"maxsq-{n}")
            _, msq, _ = lp.max_statistics(path.S)
            ratios.append(float(np.mean(msq)) / cf.v2(coeff, int(n)))
        # no explicit constant: the verdict is the bounded-trend test, rhs is NaN
        trend = cf.trend_verdict(ratios, "bounded", list(n_grid))
        verdict = "fail" if trend == "violated" else "pass"
        for n, r in zip(n_grid, ratios):
            rows.append(("maxsq", int(n), float(r), math.nan, math.nan, verdict))
        verdicts["maxsq_bounded"] = trend != "violated"
        summary["trend"] = trend
    elif check == "approx":
        rep = ma.verify_martingale_approx(coeff, innov, list(n_grid), list(m_grid),
                                          reps=min(reps, 2000), seed=seed)
        prev = math.inf
        for n, r in zip(rep.n_grid, rep.max_ratio):
            rows.append(_ineq_row("approx", n, r, prev, "pass" if r < prev else "fail"))
            prev = r
        verdicts["approx_decreasing"] = rep.decreasing or bool(np.all(rep.max_ratio == 0))
    elif check == "coboundary":
        ok = True
        for n in n_grid:
            res = ma.coboundary_check(coeff, innov, int(n), seed=seed)
            ok &= res.ok
            rows.append(_ineq_row("coboundary", n, res.residual, res.bound,
                                  "pass" if res.ok else "fail"))
        verdicts["coboundary"] = ok
    elif check == "lemma61":
        ok = True
        n_max = int(max(n_grid)) if len(n_grid) else 4096
        seqs = {"b=1": (np.ones(n_max), "one"),
                "b=log(n+1)": (np.log1p(np.arange(1, n_max + 1.0)), "log")}
        u = inv.projection_norms(innov, n_max, q)[1:]
        for name, (b, rule) in seqs.items():
            res = ma.lemma61_check(b, u, q, rule)
            verdict = "pass" if res.holds else "fail"
            ok &= res.holds
            rows.append(_ineq_row(f"lemma61_{name}", n_max, res.lhs,
                                  res.constant * res.rhs, verdict))
        verdicts["lemma61"] = ok
    else:
        raise ConfigError(f"unknown check {check!r}")
    return ExperimentResult(INEQ_HEADER, rows, verdicts, summary)


# -- audits -------------------------------------------------------------------------
def run_audit_conditions(innov, q=2.0, coeff=None, model_name=None):
    rep = inv.condition_series(innov, q)
    name = model_name or innov.kind
    rows = list(rep.rows(name))
    verdicts = {sid: v[2] == "satisfied" for sid, v in rep.series.items()}
    verdicts.update({f"lemma61_{k}": bool(r.holds) for k, r in rep.lemma.items()})
    summary = {"series": {k: {"sum": v[0], "tail_bound": v[1], "verdict": v[2]}
                          for k, v in rep.series.items()}}
    if coeff is not None:
        audit = cf.condition_audit(coeff)
        summary["coefficient_conditions"] = audit.verdicts
    return ExperimentResult(("model", "q", "j", "proj_norm", "cum_sum", "series_id",
                             "verdict"), rows, verdicts, summary)


# -- isotonic -----------------------------------------------------------------------
def run_chernoff(H, reps, seed, M=fb.DEFAULT_M, delta=fb.DEFAULT_DELTA,
                 quantiles=(0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)):
    """Reference draws of argmin{B_H(s) + s^2}; raises BoundaryHitError when
    the window is too small."""
    draws = fb.sample_argmin(H, M, delta, stream(seed, f"chernoff-H{H}", 0), reps)
    rows = [("sample", i, float(x)) for i, x in enumerate(draws)]
    qs = np.quantile(draws, quantiles)
    rows += [("quantile", float(p), float(v)) for p, v in zip(quantiles, qs)]
    summary = {"mean": float(draws.mean()), "sd": float(draws.std(ddof=1))}
    return ExperimentResult(("record", "key", "value"), rows, summary=summary)


def run_iso_fit(y):
    fit = iso.pava(y)
    rows = [(k + 1, float(a), float(b)) for k, (a, b) in enumerate(zip(fit.y, fit.mu_hat))]
    return ExperimentResult(("k", "y", "mu_hat"), rows,
                            summary={"blocks": len(fit.blocks)})


@dataclass
class IsoSetup:
    """Everything needed to standardize phi_hat_n(t) for one theorem."""

    theorem: str
    H: float
    kappa: float
    eta: float
    d_n: dict
    schedule: object = None

    def standardize(self, n, err):
        return err / (self.d_n[n] * self.kappa) / rates.limit_scale(self.eta, self.H)


def iso_setup(theorem, coeff, innov, phi_prime, n_grid, beta=None):
    """d_n, kappa and H for theorem "4.1", "4.2" or "4.3"."""
    if not phi_prime > 0:
        raise ConfigError("phi'(t) must be positive")
    eta = inv.eta(innov)
    n_grid = [int(n) for n in n_grid]
    if theorem == "4.1":
        A = cf.coefficient_sum(coeff)
        if not math.isfinite(A) or A == 0:
            raise ConfigError("theorem 4.1 needs a finite nonzero coefficient sum")
        kappa = rates.theorem_kappa("4.1", phi_prime, A=A)
        return IsoSetup("4.1", 0.5, kappa, eta, {n: n ** (-1.0 / 3.0) for n in n_grid})
    if theorem == "4.2":
        sched = rates.rate_schedule(1.0, rates.model_h(coeff, 1.0, "s_n"), n_grid,
                                    m_rule=lambda k: math.sqrt(cf.s_squared(coeff, k)))
        kappa = rates.theorem_kappa("4.2", phi_prime)
        return IsoSetup("4.2", 0.5, kappa, eta, dict(zip(n_grid, sched.d_n)), sched)
    if theorem == "4.3":
        beta = coeff.analytic_beta if beta is None else beta
        if beta is None or not 0 < beta < 2:
            raise ConfigError("theorem 4.3 needs beta in (0, 2)")
        sched = rates.rate_schedule(beta, rates.model_h(coeff, beta), n_grid,
                                    m_rule=lambda k: math.sqrt(cf.v2(coeff, k)))
        kappa = rates.theorem_kappa("4.3", phi_prime, beta=beta)
        return IsoSetup("4.3", beta / 2, kappa, eta, dict(zip(n_grid, sched.d_n)), sched)
    raise ConfigError(f"unknown theorem {theorem!r}")


def phi_hat_errors(coeff, innov, n, reps, seed, phi, t, purpose, workers=1):
    """phi_hat_n(t) - phi(t) for ``reps`` replications of y_k = phi(k/n) + X_k."""
    trend = phi(np.arange(1, n + 1) / n)
    target = float(phi(t))

    def fit(S, T, far, window):
        X = np.diff(S, axis=1, prepend=0.0)
        return iso.phi_hat_batch(trend[None, :] + X, t) - target

    parts = lp.map_chunks(fit, coeff, innov, n, reps, seed, purpose=purpose,
                          workers=workers)
    return np.concatenate(parts)


def run_iso_rate(theorem, coeff, innov, phi_slope=2.0, t=0.5, n_grid=None, reps=2000,
                 seed=0, meta_runs=st.META_RUNS, meta_n=None, beta=None, workers=1,
                 argmin_M=fb.DEFAULT_M, argmin_delta=fb.DEFAULT_DELTA):
    """Rate slope of sd(phi_hat_n(t) - phi(t)) and the meta-run KS of the
    standardized estimates against argmin{B_H(s) + s^2} draws.

    phi(x) = phi_slope * x.
    """
    if not 0 < t < 1:
        raise ConfigError("t must lie in (0, 1)")
    if not phi_slope > 0:
        raise ConfigError("phi'(t) must be positive")
    phi = lambda x: phi_slope * np.asarray(x, dtype=float)
    n_grid = [int(n) for n in (n_grid or dyadic_grid(2 ** 10, 2 ** 16))]
    meta_n = int(meta_n or n_grid[len(n_grid) // 2])
    setup = iso_setup(theorem, coeff, innov, phi_slope, sorted(set(n_grid + [meta_n])),
                      beta)
    rows, sds = [], []
    for n in n_grid:
        err = phi_hat_errors(coeff, innov, n, reps, seed, phi, t, f"iso-{n}", workers)
        sd, sd_se = st.sd_with_se(err)
        z = setup.standardize(n, err)
        sds.append(sd)
        rows.append(("rate", n, reps, float(setup.d_n[n]), setup.kappa, sd, sd_se,
                     float(np.mean(z)), float(np.std(z, ddof=1)), math.nan, math.nan, ""))
    slope, slope_se = st.ols_slope(np.log(n_grid), np.log(sds))
    expected = -rates._rate_exponent(2 * setup.H)
    verdicts = {"rate_slope": abs(slope - expected) <= SLOPE_TOL}
    summary = {"slope": slope, "slope_se": slope_se, "expected_slope": expected,
               "kappa": setup.kappa, "H": setup.H, "eta": setup.eta}
    if setup.schedule is not None:
        summary["calibration"] = setup.schedule.calibration.tolist()
    if meta_runs:
        results, mean_ok = [], []
        for m in range(meta_runs):
            err = phi_hat_errors(coeff, innov, meta_n, reps, seed, phi, t,
                                 f"iso-meta{m}", workers)
            z = setup.standardize(meta_n, err)
            ref = fb.sample_argmin(setup.H, argmin_M, argmin_delta,
                                   stream(seed, f"iso-argmin{m}", 0), reps)
            res = st.ks_two_sample(z, ref)
            results.append(res)
            se = math.sqrt(np.var(z, ddof=1) / z.size + np.var(ref, ddof=1) / ref.size)
            mean_ok.append(abs(z.mean() - ref.mean()) <= 4 * se)
            rows.append(("meta", meta_n, reps, float(setup.d_n[meta_n]), setup.kappa, math.nan,
                         math.nan, float(z.mean()), float(np.std(z, ddof=1)),
                         res.statistic, res.critical, "pass" if res.passed else "fail"))
        meta = st.meta_verdict(results)
        verdicts["argmin_ks"] = meta.passed
        summary["ks_passes"] = meta.passes
        summary["ks_runs"] = meta.runs
        summary["mean_within_4se"] = int(sum(mean_ok))
    header = ("record", "n", "reps", "d_n", "kappa", "sd", "sd_se", "z_mean", "z_sd",
              "ks_stat", "ks_critical", "verdict")
    return ExperimentResult(header, rows, verdicts, summary)
