"""Orlicz norms and numerical audits of the moment and approximation bounds.

Every audit compares a Monte Carlo left side to a right side with a one-sided
verdict: a check fails only when lhs > rhs + 5 standard errors, so a loose
bound never causes a failure.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy import optimize

from . import coeffs as cf
from . import innovations as inv
from . import linproc as lp
from .errors import ConfigError, NumericalError
from .rng import stream

SLACK_SE = 5.0
MIN_SAMPLES = 10 ** 4
A_ABS_TOL = 1e-13


# -- Orlicz functions ---------------------------------------------------------
@dataclass(frozen=True)
class OrliczFunction:
    """Young function Psi, optionally composed with an inner power:
    Psi_p(x) = Psi(x^p).

    ``kind`` is "power" (Psi(x) = x^q) or "log_power"
    (Psi(x) = x^2 log^alpha(1 + x^2)).
    """

    kind: str
    param: float
    inner: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float) ** self.inner
        if self.kind == "power":
            return x ** self.param
        x2 = x * x
        return x2 * np.log1p(x2) ** self.param

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        xp = x ** self.inner
        dxp = self.inner * x ** (self.inner - 1) if self.inner != 1 else 1.0
        if self.kind == "power":
            return self.param * xp ** (self.param - 1) * dxp
        x2 = xp * xp
        lg = np.log1p(x2)
        inner = 2 * xp * lg ** self.param \
            + x2 * self.param * lg ** (self.param - 1) * 2 * xp / (1 + x2)
        return inner * dxp

    def inverse(self, y):
        """Psi^{-1}(y) (of the composed function)."""
        if y < 0:
            raise ConfigError("inverse needs y >= 0")
        if y == 0:
            return 0.0
        if self.kind == "power":
            base = y ** (1.0 / self.param)
        else:
            base = _log_power_inverse(self.param, y)
        return base ** (1.0 / self.inner)

    @property
    def growth_index(self):
        """alpha with Psi(c x) <= c^alpha Psi(x) for c >= 2."""
        base = self.param if self.kind == "power" else 2 + 2 * self.param
        return base * self.inner


def power(q, inner=1.0):
    """Psi(x) = x^q.  q = 1 is accepted for the dyadic maximal bound."""
    if q < 1:
        raise ConfigError("power Orlicz function needs q >= 1")
    return OrliczFunction("power", float(q), float(inner))


def log_power(alpha, inner=1.0):
    """Psi(x) = x^2 log^alpha(1 + x^2)."""
    if alpha <= 2:
        raise ConfigError("log_power needs alpha > 2")
    return OrliczFunction("log_power", float(alpha), float(inner))


def with_inner_power(psi, p):
    return OrliczFunction(psi.kind, psi.param, psi.inner * p)


def _log_power_inverse(alpha, y):
    f = lambda x: x * x * math.log1p(x * x) ** alpha - y
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    lo = hi / 2.0 if hi > 1.0 else 0.0
    return optimize.brentq(f, lo, hi, xtol=1e-300, rtol=1e-14, maxiter=500)


# -- empirical norms ----------------------------------------------------------
def orlicz_norm(sample, psi, with_se=False):
    """inf{c > 0 : mean Psi(|x| / c) <= 1} on an empirical sample.

    With ``with_se`` a delta-method standard error is returned as well.
    """
    x = np.abs(np.asarray(sample, dtype=float)).ravel()
    if x.size == 0:
        raise ConfigError("orlicz_norm: empty sample")
    top = float(x.max())
    if top == 0.0:
        return (0.0, 0.0) if with_se else 0.0
    size = x.size

    def g(logc):
        return float(np.mean(psi(x / math.exp(logc)))) - 1.0

    lo = math.log(top / psi.inverse(size))
    hi = math.log(top / psi.inverse(1.0 / size))
    while g(lo) < 0:
        lo -= 1.0
    while g(hi) > 0:
        hi += 1.0
    logc = optimize.brentq(g, lo, hi, xtol=1e-13, rtol=1e-13, maxiter=500)
    c = math.exp(logc)
    if not with_se:
        return c
    vals = psi(x / c)
    slope = float(np.mean(psi.derivative(x / c) * x / c ** 2))
    se = float(np.std(vals, ddof=1) / math.sqrt(size) / slope) if slope > 0 else math.inf
    return c, se


def moment_se(sample, q):
    """(||X||_q, delta-method standard error) of the empirical q-norm."""
    vals = np.abs(np.asarray(sample, dtype=float)) ** q
    m = float(np.mean(vals))
    if m == 0:
        return 0.0, 0.0
    norm = m ** (1 / q)
    se = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) * norm / (q * m)
    return norm, se


def one_sided_verdict(lhs, rhs, se):
    return "pass" if lhs <= rhs + SLACK_SE * se else "fail"


# -- Proposition-level moment bound -------------------------------------------
def moment_constant(q):
    """C_q with C_q^q = 18 q^{3/2} / (q - 1)^{1/2}."""
    if q < 2:
        raise ConfigError("moment constant defined for q >= 2")
    return (18 * q ** 1.5 / math.sqrt(q - 1)) ** (1 / q)


def projection_sum(innov, q):
    """D_q = sum_j ||P_0(xi_j)||_q (exact partial sum plus geometric tail)."""
    total, tail, _ = inv.condition_series(innov, q).series["proj_sum"]
    return total + tail


@dataclass
class InequalityRow:
    check: str
    n: int
    lhs: float
    rhs: float
    se: float
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self):
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)

    @property
    def verdict(self):
        return one_sided_verdict(self.lhs, self.rhs, self.se)


def verify_moment_inequality(coeff, innov, m_grid, q, reps=MIN_SAMPLES, seed=0):
    """Empirical ||S_m||_q against C_q D_q v_m for each m."""
    if q > innov.moment_order_max:
        raise ConfigError(f"q = {q} exceeds the innovation moment order")
    if reps < MIN_SAMPLES:
        raise ConfigError(f"inequality verdicts need >= {MIN_SAMPLES} samples")
    cq = moment_constant(q)
    dq = projection_sum(innov, q)
    rows = []
    for m in m_grid:
        path = lp.simulate_paths(coeff, innov, int(m), reps, seed, [1.0],
                                 purpose=f"moment-{m}")
        norm, se = moment_se(path.S[:, -1], q)
        bound = cq * dq * math.sqrt(cf.v2(coeff, int(m)))
        rows.append(InequalityRow("moment", int(m), norm, bound, se,
                                  {"C_q": cq, "D_q": dq}))
    return rows


# -- maximal inequality over dyadic blocks ------------------------------------
def dyadic_max_bound(paths, psi, p, N):
    """(lhs, rhs, se) for || max_{m <= 2^N} |S_m| ||_p against
    sum_{L=0}^N ||S_{2^L}||_{Psi_p} (Psi^{-1}(2^{N-L}))^{1/p}.

    ``paths`` has shape (reps, 2^N) with columns S_1..S_{2^N}.
    """
    if N < 3:
        raise ConfigError("dyadic_max_bound needs N >= 3")
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    if paths.shape[1] < 2 ** N:
        raise ConfigError("paths shorter than 2^N")
    mx = np.max(np.abs(paths[:, :2 ** N]), axis=1)
    lhs, se_l = moment_se(mx, p)
    psi_p = with_inner_power(psi, p)
    rhs, var_r = 0.0, 0.0
    for L in range(N + 1):
        norm, se = orlicz_norm(paths[:, 2 ** L - 1], psi_p, with_se=True)
        w = psi.inverse(2.0 ** (N - L)) ** (1.0 / p)
        rhs += norm * w
        var_r += (se * w) ** 2
    return lhs, rhs, math.sqrt(se_l ** 2 + var_r)


# -- martingale approximation -------------------------------------------------
@dataclass
class ApproxReport:
    n_grid: np.ndarray
    diff_norm: np.ndarray       # ||S_n - T_n||_Psi
    diff_se: np.ndarray
    max_ratio: np.ndarray       # ||max_k |S_k - T_k| ||_2 / s_n
    max_ratio_se: np.ndarray
    decreasing: bool
    fits: dict                  # exponent -> (C1, C2, holds_out_of_sample)


def _tail_projection_sums(innov, q, m_grid):
    lag = max(m_grid) + 1
    norms = inv.projection_norms(innov, lag + 512, q)
    total = inv.condition_series(innov, q).series["proj_sum"]
    full = total[0] + total[1]
    return np.array([max(full - float(np.sum(norms[:m])), 0.0) for m in m_grid])


def _fit_constants(lhs, v, tau, m_grid, exponent):
    """Smallest (C1, C2) >= 0 (in the sum C1 + C2 after scaling) such that
    lhs_n <= C1 v_n^e tau_m + C2 m for every (n, m)."""
    rows_a, rows_b = [], []
    for i in range(len(lhs)):
        for j, m in enumerate(m_grid):
            rows_a.append([-(v[i] ** exponent) * tau[j], -float(m)])
            rows_b.append(-lhs[i])
    A = np.array(rows_a)
    scale = np.maximum(np.max(np.abs(A), axis=0), 1e-300)
    res = optimize.linprog(np.ones(2), A_ub=A / scale, b_ub=np.array(rows_b),
                           bounds=[(0, None), (0, None)], method="highs")
    if not res.success:
        raise NumericalError(f"constant fit failed: {res.message}")
    return res.x / scale


def verify_martingale_approx(coeff, innov, n_grid, m_trunc_grid, psi=None,
                             reps=2000, seed=0):
    """Coupled S/T simulation: Orlicz norm of S_n - T_n, the max-deviation
    ratio against s_n, and fitted constants for both exponents of v_n."""
    psi = psi or power(2)
    n_grid = [int(n) for n in n_grid]
    diff, dse, ratio, rse, vs = [], [], [], [], []
    for n in n_grid:
        path = lp.simulate_paths(coeff, innov, n, reps, seed, [1.0], True,
                                 normalizer="s_n", purpose=f"approx-{n}")
        dev = path.S[:, -1] - path.T[:, -1]
        nm, se = orlicz_norm(dev, psi, with_se=True)
        diff.append(nm)
        dse.append(se)
        _, _, mdev = lp.max_statistics(path.S, path.T)
        r, rs = moment_se(mdev, 2)
        s_n = path.normalizer[1]
        ratio.append(r / s_n)
        rse.append(rs / s_n)
        vs.append(math.sqrt(cf.v2(coeff, n)))
    ratio = np.array(ratio)
    q = 2.0 if psi.kind != "power" else psi.param
    tau = _tail_projection_sums(innov, q, m_trunc_grid)
    fits = {}
    half = max(2, len(n_grid) // 2)
    for e in (1, 2):
        c1, c2 = _fit_constants(np.array(diff), np.array(vs), tau, m_trunc_grid, e)
        if len(n_grid) > half:
            c1h, c2h = _fit_constants(np.array(diff[:half]), np.array(vs[:half]), tau,
                                      m_trunc_grid, e)
            bound = np.array([[c1h * v ** e * t + c2h * m for t, m in
                               zip(tau, m_trunc_grid)] for v in vs[half:]])
            holds = bool(np.all(np.array(diff[half:])[:, None]
                                <= bound + SLACK_SE * np.array(dse[half:])[:, None]))
        else:
            holds = None
        fits[e] = (float(c1), float(c2), holds)
    return ApproxReport(np.array(n_grid), np.array(diff), np.array(dse), ratio,
                        np.array(rse), bool(np.all(np.diff(ratio) < 0)), fits)


# -- coboundary identity ------------------------------------------------------
@dataclass
class CoboundaryResult:
    residual: float
    bound: float
    predicted: float
    A: float
    heyde_tail: float

    @property
    def ok(self):
        return self.residual <= self.bound


def coboundary_check(coeff, innov, n, trunc=1 << 16, seed=0):
    """Check S_k = A sum_{i<=k} xi_i + Z_1 - Z_{k+1} on a simulated path.

    Z_k = sum_{l=1}^{L} r_l xi_{k-l} with r_l = sum_{i>=l} a_i is truncated at
    L = ``trunc`` and S_k uses a_0..a_L.  With the exact total A the two
    truncations leave exactly -r_{L+1} sum_{t=1}^{k} xi_{t-L}, which is the
    declared bound (plus rounding).  ``heyde_tail`` reports the L2 size
    (sum_{l>L} r_l^2)^{1/2} of the omitted part of Z.
    """
    if not coeff.causal:
        raise ConfigError("coboundary_check implemented for causal coefficients")
    audit = cf.condition_audit(coeff, 1 << 12)
    if audit.verdicts.get("heyde_right") == "violated":
        raise ConfigError("Heyde condition (H) fails for this coefficient model")
    A = cf.coefficient_sum(coeff)
    if not math.isfinite(A):
        raise ConfigError("coefficients are not summable")
    lo, hi = coeff.bounds
    L = max(1, int(min(trunc, hi)) if math.isfinite(hi) else int(trunc))
    a = coeff.values(0, L)
    b = np.cumsum(a)
    r = A - np.concatenate(([0.0], b[:-1]))          # r_l for l = 0..L
    r_next = A - b[-1]                               # r_{L+1}
    rng = stream(seed, "coboundary", 0)
    # xi on times 1 - L .. n; time t sits at array index t + L - 1
    xi = inv.sample_path(innov, 1 - L, n, rng, 1).xi[0]
    S = np.cumsum(np.convolve(xi, a)[L:L + n])
    partial = np.cumsum(xi[L:L + n])
    # Z_k = sum_{l=1}^{L} r_l xi_{k-l} sits at index k + L - 2, k = 1..n+1
    Z = np.convolve(xi, r[1:])[L - 1:L + n]
    resid = S - A * partial - Z[0] + Z[1:]
    shifted = np.cumsum(xi[:n])                      # sum_{t=1}^{k} xi_{t-L}
    predicted = float(np.max(np.abs(r_next * shifted)))
    scale = max(1.0, float(np.max(np.abs(S))), abs(A) * float(np.max(np.abs(partial))),
                float(np.max(np.abs(Z))))
    # rounding of the convolutions plus the quadrature error of A
    slack = 1e-12 * scale * math.log2(L + n + 2) \
        + A_ABS_TOL * max(1.0, abs(A)) * float(np.max(np.abs(partial)))
    if math.isfinite(hi) and L >= hi:
        heyde_tail = 0.0
    else:
        heyde_tail = math.sqrt(_heyde_tail_sq(coeff, A, L))
    return CoboundaryResult(float(np.max(np.abs(resid))), predicted + slack,
                            predicted, A, heyde_tail)


def _heyde_tail_sq(coeff, A, L):
    # sum_{l > L} r_l^2 with r_l computed explicitly over a long stretch
    vals = coeff.values(0, 8 * L)
    r = A - np.cumsum(vals)[L:]
    return float(np.sum(r ** 2))


# -- series lemma -------------------------------------------------------------
@lru_cache(maxsize=32)
def lemma_constant(q, b_rule="one", grid_max=10 ** 6):
    """C_q = 2^{1/p} K_alpha with alpha = 2/p, 1/p + 1/q = 1.

    K_alpha bounds n^alpha b_n / sum_{k<=n} k^{alpha-1} b_k: alpha itself for
    b = 1 (integral comparison), a numerical supremum for b = log(n+1).
    """
    if q <= 1:
        raise ConfigError("lemma needs q > 1")
    p = q / (q - 1)
    alpha = 2.0 / p
    n = np.arange(1, grid_max + 1, dtype=float)
    if b_rule == "one":
        # sum_{k<=n} k^{alpha-1} >= n^alpha / max(alpha, 1)
        K = max(alpha, 1.0)
        ratio = n ** alpha / np.cumsum(n ** (alpha - 1))
        if np.max(ratio) > K * (1 + 1e-9):
            raise NumericalError("K_alpha hypothesis fails on the grid")
    elif b_rule == "log":
        b = np.log1p(n)
        ratio = n ** alpha * b / np.cumsum(n ** (alpha - 1) * b)
        K = float(np.max(ratio))
        if ratio[-1] > ratio[len(ratio) // 2]:
            raise NumericalError("K_alpha ratio still increasing at the grid end")
    else:
        raise ConfigError(f"unknown b rule {b_rule!r}")
    return 2 ** (1 / p) * K


@dataclass
class LemmaResult:
    lhs: float
    rhs: float
    constant: float

    @property
    def holds(self):
        return self.lhs <= self.constant * self.rhs * (1 + 1e-12)


def lemma61_check(b, u, q, b_rule="one"):
    """Truncated sum b_n u_n against C_q sum b_n (n^-1 sum_{k>=n} u_k^q)^{1/q}.

    ``b`` and ``u`` are arrays indexed from n = 1; the truncation drops the
    same tail from both sides' inner sums.
    """
    b = np.asarray(b, dtype=float)
    u = np.asarray(u, dtype=float)
    if b.shape != u.shape:
        raise ConfigError("b and u must have the same length")
    if np.any(b < 0) or np.any(u < 0):
        raise ConfigError("sequences must be nonnegative")
    n = np.arange(1, len(u) + 1, dtype=float)
    tails = np.cumsum((u ** q)[::-1])[::-1]
    lhs = float(np.sum(b * u))
    rhs = float(np.sum(b * (tails / n) ** (1 / q)))
    return LemmaResult(lhs, rhs, lemma_constant(q, b_rule))
