"""Stationary innovation models with closed-form projections.

Three families are provided because each has an exact expression for the
projections P_0(xi_j) = E(xi_j | F_0) - E(xi_j | F_{-1}):

* IID Gaussian or scaled Student-t;
* causal linear filters xi_j = sum_{m>=0} theta_m eps_{j-m} of a Gaussian
  white noise (geometric or finite theta);
* centred functionals xi_j = f(Y_j) of a finite stationary Markov chain.

Every sampler also returns the martingale differences d_j = sum_l P_j(xi_l)
built from the same randomness, so S_n - T_n can be formed path by path.
"""
from dataclasses import dataclass
from functools import cached_property
import math

import numba
import numpy as np
from scipy import signal, special

from .errors import ConfigError, NumericalError

STUDENT_T_GUARD = 0.01
SERIES_TOL = 1e-17
MAX_LAG = 1 << 20


def gaussian_abs_moment(q):
    """||N(0,1)||_q = (2^{q/2} Gamma((q+1)/2) / sqrt(pi))^{1/q}."""
    if q <= 0:
        raise ConfigError("q must be positive")
    log_m = 0.5 * q * math.log(2.0) + special.gammaln((q + 1) / 2) - 0.5 * math.log(math.pi)
    return math.exp(log_m / q)


def student_t_abs_moment(q, nu):
    """||T_nu||_q for a standard Student-t with nu > q degrees of freedom."""
    if q >= nu:
        return math.inf
    log_m = (0.5 * q * math.log(nu) + special.gammaln((q + 1) / 2)
             + special.gammaln((nu - q) / 2) - 0.5 * math.log(math.pi)
             - special.gammaln(nu / 2))
    return math.exp(log_m / q)


@dataclass(frozen=True)
class InnovationModel:
    """Stationary, centred innovation sequence (xi_i).

    Build with :func:`iid_gaussian`, :func:`iid_student_t`,
    :func:`causal_linear` or :func:`markov_functional`.
    """

    kind: str
    params: tuple

    def param(self, name):
        return dict(self.params)[name]

    def describe(self):
        parts = []
        for k, v in self.params:
            if isinstance(v, tuple):
                v = np.round(np.asarray(v, dtype=float), 6).tolist()
            parts.append(f"{k}={v}")
        return ";".join(parts)

    @property
    def moment_order_max(self):
        if self.kind == "iid_student_t":
            return self.param("nu") - STUDENT_T_GUARD
        return math.inf

    @property
    def sigma(self):
        return self.param("sigma") if self.kind != "markov" else None

    # -- causal linear helpers ----------------------------------------------
    @property
    def theta_geometric(self):
        return self.kind == "causal_linear" and self.param("theta")[0] == "geometric"

    def theta(self, m):
        """theta_m for an integer array m >= 0."""
        m = np.asarray(m)
        spec = self.param("theta")
        if spec[0] == "geometric":
            return np.where(m >= 0, spec[1] ** np.maximum(m, 0), 0.0)
        vals = np.asarray(spec[1])
        inside = (m >= 0) & (m < len(vals))
        return np.where(inside, vals[np.clip(m, 0, len(vals) - 1)], 0.0)

    @property
    def theta_sum(self):
        spec = self.param("theta")
        if spec[0] == "geometric":
            return 1.0 / (1.0 - spec[1])
        return float(np.sum(spec[1]))

    def theta_square_tail(self, n):
        """sum_{m >= n} theta_m^2."""
        spec = self.param("theta")
        if spec[0] == "geometric":
            rho = spec[1]
            return rho ** (2 * n) / (1 - rho ** 2)
        vals = np.asarray(spec[1])
        return float(np.sum(vals[n:] ** 2)) if n < len(vals) else 0.0

    # -- Markov helpers -----------------------------------------------------
    @cached_property
    def chain(self):
        return _MarkovData(np.asarray(self.param("P")), np.asarray(self.param("f")))


class _MarkovData:
    """Derived quantities of a finite chain, computed once per model."""

    def __init__(self, P, f):
        m = P.shape[0]
        self.P = P
        w, v = np.linalg.eig(P.T)
        k = int(np.argmin(np.abs(w - 1.0)))
        pi = np.real(v[:, k])
        self.pi = pi / pi.sum()
        self.f = f - self.pi @ f
        fund = np.eye(m) - P + np.outer(np.ones(m), self.pi)
        self.h = np.linalg.solve(fund, self.f)
        resid = self.h - P @ self.h - self.f
        if np.max(np.abs(resid)) > 1e-12 * max(1.0, np.max(np.abs(self.f))):
            raise NumericalError("Poisson equation residual above 1e-12")
        self.Ph = P @ self.h
        self.cum = np.cumsum(P, axis=1)
        self.cum[:, -1] = 1.0
        self.pi_cum = np.cumsum(self.pi)
        self.pi_cum[-1] = 1.0
        self.slem = float(np.sort(np.abs(np.linalg.eigvals(P)))[-2]) if m > 1 else 0.0

    def powers_f(self, j_max):
        """Rows (P^j f) for j = 0..j_max."""
        out = np.empty((j_max + 1, len(self.f)))
        out[0] = self.f
        for j in range(1, j_max + 1):
            out[j] = self.P @ out[j - 1]
        return out


# -- constructors -------------------------------------------------------------
def iid_gaussian(sigma=1.0):
    if not sigma > 0:
        raise ConfigError("iid_gaussian: sigma must be positive")
    return InnovationModel("iid_gaussian", (("sigma", float(sigma)),))


def iid_student_t(nu, sigma=1.0):
    """Student-t scaled to variance sigma^2; needs nu > 4."""
    if not nu > 4:
        raise ConfigError("iid_student_t: nu must exceed 4")
    if not sigma > 0:
        raise ConfigError("iid_student_t: sigma must be positive")
    return InnovationModel("iid_student_t", (("nu", float(nu)), ("sigma", float(sigma))))


def causal_linear(theta, sigma=1.0):
    """xi_j = sum_m theta_m eps_{j-m}, eps iid N(0, sigma^2).

    ``theta`` is ``("geometric", rho)`` with |rho| < 1 or a finite list.
    """
    if not sigma > 0:
        raise ConfigError("causal_linear: sigma must be positive")
    if isinstance(theta, (tuple, list)) and len(theta) == 2 and theta[0] == "geometric":
        rho = float(theta[1])
        if not abs(rho) < 1:
            raise ConfigError("causal_linear: need |rho| < 1")
        spec = ("geometric", rho)
    else:
        vals = tuple(float(t) for t in theta)
        if not vals or not all(math.isfinite(t) for t in vals):
            raise ConfigError("causal_linear: theta must be a non-empty finite list")
        spec = ("finite", vals)
    return InnovationModel("causal_linear", (("theta", spec), ("sigma", float(sigma))))


def markov_functional(P, f):
    """xi_j = f(Y_j) - pi f for a stationary irreducible aperiodic chain Y."""
    P = np.asarray(P, dtype=float)
    f = np.asarray(f, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or f.shape != (P.shape[0],):
        raise ConfigError("markov_functional: P must be m x m and f of length m")
    if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1)) > 1e-12:
        raise ConfigError("markov_functional: P must be row-stochastic")
    m = P.shape[0]
    # primitive matrix <=> irreducible and aperiodic (Wielandt bound)
    reach = np.linalg.matrix_power((P > 0).astype(float), (m - 1) ** 2 + 1)
    if not np.all(reach > 0):
        raise ConfigError("markov_functional: P must be irreducible and aperiodic")
    model = InnovationModel("markov", (("P", tuple(map(tuple, P))), ("f", tuple(f))))
    model.chain  # validate Poisson solve eagerly
    return model


def two_state(p=0.9, f=(1.0, -1.0)):
    """Symmetric two-state chain staying put with probability p."""
    return markov_functional([[p, 1 - p], [1 - p, p]], f)


def from_config(record):
    """Build from e.g. ``{"kind": "causal_linear", "rho": 0.5}``."""
    rec = dict(record)
    kind = rec.pop("kind", None)
    try:
        if kind in ("iid_gaussian", "gaussian"):
            return iid_gaussian(rec.get("sigma", 1.0))
        if kind in ("iid_student_t", "student_t"):
            return iid_student_t(rec["nu"], rec.get("sigma", 1.0))
        if kind == "causal_linear":
            theta = rec.get("theta")
            if theta is None:
                theta = ("geometric", rec["rho"])
            return causal_linear(theta, rec.get("sigma", 1.0))
        if kind in ("markov", "markov_functional"):
            if "P" in rec:
                return markov_functional(rec["P"], rec["f"])
            return two_state(rec.get("p", 0.9), rec.get("f", (1.0, -1.0)))
    except KeyError as exc:
        raise ConfigError(f"{kind}: missing parameter {exc.args[0]!r}") from None
    raise ConfigError(f"unknown innovation kind {kind!r}")


# -- sampling -----------------------------------------------------------------
@dataclass
class InnovationPath:
    """Innovations and martingale differences on the window [j_lo, j_hi].

    Arrays have shape (reps, j_hi - j_lo + 1).  ``state`` holds the
    generating variables (eps for linear models, Y for Markov chains).
    """

    j_lo: int
    xi: np.ndarray
    d: np.ndarray
    state: np.ndarray = None


def sample_path(model, j_lo, j_hi, rng, reps=1):
    """Jointly sample (xi_j, d_j) for j_lo <= j <= j_hi, stationary start."""
    if j_hi < j_lo:
        raise ConfigError("sample_path: need j_lo <= j_hi")
    length = j_hi - j_lo + 1
    kind = model.kind
    if kind == "iid_gaussian":
        xi = model.param("sigma") * rng.standard_normal((reps, length))
        return InnovationPath(j_lo, xi, xi, xi)
    if kind == "iid_student_t":
        nu = model.param("nu")
        scale = model.param("sigma") * math.sqrt((nu - 2) / nu)
        xi = scale * rng.standard_t(nu, size=(reps, length))
        return InnovationPath(j_lo, xi, xi, xi)
    if kind == "causal_linear":
        return _sample_linear(model, j_lo, length, rng, reps)
    return _sample_markov(model, j_lo, length, rng, reps)


def _sample_linear(model, j_lo, length, rng, reps):
    sigma = model.param("sigma")
    spec = model.param("theta")
    if spec[0] == "geometric":
        rho = spec[1]
        eps = sigma * rng.standard_normal((reps, length))
        prev = sigma / math.sqrt(1 - rho ** 2) * rng.standard_normal(reps)
        xi, _ = signal.lfilter([1.0], [1.0, -rho], eps, axis=1, zi=(rho * prev)[:, None])
    else:
        theta = np.asarray(spec[1])
        k = len(theta) - 1
        eps_ext = sigma * rng.standard_normal((reps, length + k))
        xi = signal.fftconvolve(eps_ext, theta[None, :], mode="valid", axes=1) \
            if k > 32 else _direct_filter(eps_ext, theta, length)
        eps = eps_ext[:, k:]
    return InnovationPath(j_lo, xi, model.theta_sum * eps, eps)


def _direct_filter(eps_ext, theta, length):
    k = len(theta) - 1
    out = np.zeros((eps_ext.shape[0], length))
    for m, t in enumerate(theta):
        out += t * eps_ext[:, k - m:k - m + length]
    return out


def _sample_markov(model, j_lo, length, rng, reps):
    ch = model.chain
    u = rng.random((reps, length + 1))
    y = _markov_walk(u, ch.pi_cum, ch.cum)
    xi = ch.f[y[:, 1:]]
    d = ch.h[y[:, 1:]] - ch.Ph[y[:, :-1]]
    return InnovationPath(j_lo, xi, d, y[:, 1:])


@numba.njit(cache=True)
def _markov_walk(u, pi_cum, cum):
    # inverse-cdf steps: state = number of cumulative probabilities <= u
    reps, steps = u.shape
    m = cum.shape[0]
    y = np.empty((reps, steps), dtype=np.int64)
    for r in range(reps):
        s = 0
        while s < m - 1 and u[r, 0] >= pi_cum[s]:
            s += 1
        y[r, 0] = s
        for t in range(1, steps):
            row = cum[s]
            s = 0
            while s < m - 1 and u[r, t] >= row[s]:
                s += 1
            y[r, t] = s
    return y


def sample_window(model, j_lo, j_hi, rng):
    """xi_{j_lo..j_hi} (single path)."""
    return sample_path(model, j_lo, j_hi, rng, 1).xi[0]


def martingale_difference(model, path):
    """d_j aligned with ``path`` (same underlying randomness)."""
    return path.d


# -- projections --------------------------------------------------------------
def _check_q(model, q):
    if q < 1:
        raise ConfigError("q must be >= 1")
    if q > model.moment_order_max:
        raise ConfigError(f"q = {q} exceeds moment_order_max = {model.moment_order_max}")


def marginal_norm(model, q):
    """||xi_0||_q."""
    _check_q(model, q)
    if model.kind == "iid_gaussian":
        return model.param("sigma") * gaussian_abs_moment(q)
    if model.kind == "iid_student_t":
        nu = model.param("nu")
        return model.param("sigma") * math.sqrt((nu - 2) / nu) * student_t_abs_moment(q, nu)
    if model.kind == "causal_linear":
        return (model.param("sigma") * gaussian_abs_moment(q)
                * math.sqrt(model.theta_square_tail(0)))
    ch = model.chain
    return float(ch.pi @ np.abs(ch.f) ** q) ** (1 / q)


def projection_norms(model, j_max, q):
    """||P_0(xi_j)||_q for j = 0..j_max (zero for j < 0: all models adapted)."""
    _check_q(model, q)
    j = np.arange(j_max + 1)
    if model.kind in ("iid_gaussian", "iid_student_t"):
        return np.where(j == 0, marginal_norm(model, q), 0.0)
    if model.kind == "causal_linear":
        return np.abs(model.theta(j)) * model.param("sigma") * gaussian_abs_moment(q)
    ch = model.chain
    pf = ch.powers_f(j_max + 1)
    # P_0(xi_j) = (P^j f)(Y_0) - (P^{j+1} f)(Y_{-1}); law of (Y_{-1}, Y_0)
    joint = ch.pi[:, None] * ch.P
    diff = pf[:-1][:, None, :] - pf[1:][:, :, None]
    return np.einsum("xy,jxy->j", joint, np.abs(diff) ** q) ** (1 / q)


def projection_norm(model, j, q):
    """||P_0(xi_j)||_q (exact)."""
    if j < 0:
        _check_q(model, q)
        return 0.0
    return float(projection_norms(model, int(j), q)[-1])


def conditional_norms(model, n_max, q):
    """||E(xi_n | F_0)||_q for n = 0..n_max."""
    _check_q(model, q)
    n = np.arange(n_max + 1)
    if model.kind in ("iid_gaussian", "iid_student_t"):
        return np.where(n == 0, marginal_norm(model, q), 0.0)
    if model.kind == "causal_linear":
        tails = np.array([model.theta_square_tail(int(k)) for k in n])
        return model.param("sigma") * gaussian_abs_moment(q) * np.sqrt(tails)
    ch = model.chain
    pf = ch.powers_f(n_max)
    return (np.abs(pf) ** q @ ch.pi) ** (1 / q)


def projection_cross(model, i, j):
    """E[P_0(xi_i) P_{-1}(xi_j)] computed exactly on the state space."""
    if model.kind != "markov":
        return 0.0
    ch = model.chain
    pf = ch.powers_f(max(i, j) + 2)
    # g(b, c) = P_0 part on (Y_{-1}=b, Y_0=c); g'(a, b) = P_{-1} part on (Y_{-2}=a, Y_{-1}=b)
    g = pf[i][None, :] - pf[i + 1][:, None]
    g2 = pf[j + 1][None, :] - pf[j + 2][:, None]
    w = ch.pi[:, None, None] * ch.P[:, :, None] * ch.P[None, :, :]
    return float(np.einsum("abc,bc,ab->", w, g, g2))


# -- long-run variance --------------------------------------------------------
def eta(model):
    """eta = E d_0^2 (all built-ins are ergodic, so eta is a constant)."""
    if model.kind in ("iid_gaussian", "iid_student_t"):
        return model.param("sigma") ** 2
    if model.kind == "causal_linear":
        return model.theta_sum ** 2 * model.param("sigma") ** 2
    return eta_poisson(model)


def eta_poisson(model):
    """E d_0^2 with d_0 = h(Y_0) - (Ph)(Y_{-1}) from the Poisson solution."""
    ch = model.chain
    sq = (ch.h[None, :] - ch.Ph[:, None]) ** 2
    return float(np.sum(ch.pi[:, None] * ch.P * sq))


def eta_covariance_series(model, tol=SERIES_TOL):
    """gamma_0 + 2 sum_{k>=1} gamma_k by explicit summation of P^k f."""
    ch = model.chain
    weighted = ch.pi * ch.f
    v = ch.f.copy()
    total = float(weighted @ v)
    for _ in range(MAX_LAG):
        v = ch.P @ v
        v -= ch.pi @ v  # remove the rounding drift toward constants
        term = float(weighted @ v)
        total += 2 * term
        if np.max(np.abs(v)) < tol:
            return total
    raise NumericalError("covariance series did not converge")


def autocovariance(model, k):
    """Cov(xi_0, xi_k)."""
    k = abs(int(k))
    if model.kind in ("iid_gaussian", "iid_student_t"):
        return model.param("sigma") ** 2 if k == 0 else 0.0
    if model.kind == "causal_linear":
        spec = model.param("theta")
        sigma2 = model.param("sigma") ** 2
        if spec[0] == "geometric":
            rho = spec[1]
            return sigma2 * rho ** k / (1 - rho ** 2)
        th = np.asarray(spec[1])
        return sigma2 * float(np.dot(th[:len(th) - k], th[k:])) if k < len(th) else 0.0
    ch = model.chain
    v = np.linalg.matrix_power(ch.P, k) @ ch.f
    return float((ch.pi * ch.f) @ v)


# -- condition series ---------------------------------------------------------
@dataclass
class ProjectionReport:
    """Partial sums of the projective series, each with a tail bound.

    ``series`` maps a series id to (partial sum, tail bound, verdict);
    ``terms`` maps it to (indices, terms).
    """

    q: float
    j: np.ndarray
    norms: np.ndarray
    series: dict
    lemma: dict
    terms: dict = None

    def rows(self, model_name):
        """(model, q, j, ||P_0 xi_j||_q, partial sum of the series up to j,
        series id, verdict)."""
        for sid, (total, bound, verdict) in self.series.items():
            idx, vals = self.terms[sid]
            for j, c in zip(idx, np.cumsum(vals)):
                yield (model_name, self.q, int(j), float(self.norms[j]), float(c),
                       sid, verdict)


def _decay_window(model, tol=1e-16):
    """Lag beyond which projections are zero or below ``tol`` (geometric)."""
    if model.kind in ("iid_gaussian", "iid_student_t"):
        return 1, 0.0
    if model.kind == "causal_linear":
        spec = model.param("theta")
        if spec[0] == "finite":
            return len(spec[1]), 0.0
        rho = abs(spec[1])
    else:
        rho = model.chain.slem
    if rho == 0.0:
        return 2, 0.0
    lag = int(math.ceil(math.log(tol) / math.log(rho))) + 1
    if lag > MAX_LAG:
        raise NumericalError("projections decay too slowly for an exact window")
    return lag, rho


def _geometric_tail(terms, rho):
    """Bound on the sum past the window of terms decaying like rho^n times a
    polynomial factor that is nonincreasing in ratio terms."""
    if rho == 0.0 or terms[-1] == 0.0:
        return 0.0
    r = min(max(rho, terms[-1] / terms[-2] if terms[-2] > 0 else rho) * 1.01, 0.999999)
    return float(terms[-1] * r / (1 - r))


def condition_series(model, q=2.0):
    """Projective condition series with partial sums and tail bounds.

    Series ids: ``proj_sum`` (sum_j ||P_0 xi_j||_q), ``cond12_fwd`` and
    ``cond12_bwd`` (n^{-1/q}-weighted conditional norms), ``log_proj``
    (sum log(1+|j|) ||P_0 xi_j||_2), ``cond20_fwd``/``cond20_bwd``
    (log n / sqrt n weighted conditional 2-norms).  The backward series are
    identically 0 because every built-in model is adapted.
    """
    from .martapprox import lemma61_check

    lag, rho = _decay_window(model)
    j = np.arange(lag + 1)
    pn = projection_norms(model, lag, q)
    pn2 = projection_norms(model, lag, 2.0)
    cn = conditional_norms(model, lag, q)
    cn2 = conditional_norms(model, lag, 2.0)
    n = j[1:].astype(float)
    terms = {
        "proj_sum": pn,
        "cond12_fwd": cn[1:] / n ** (1 / q),
        "cond12_bwd": np.zeros(lag),
        "log_proj": np.log1p(j) * pn2,
        "cond20_fwd": np.log(n) * cn2[1:] / np.sqrt(n),
        "cond20_bwd": np.zeros(lag),
    }
    index = {sid: (j if len(t) == len(j) else j[1:]) for sid, t in terms.items()}
    series = {}
    for sid, t in terms.items():
        total = float(np.sum(t))
        bound = _geometric_tail(t, rho)
        ok = math.isfinite(total) and math.isfinite(bound)
        series[sid] = (total, bound, "satisfied" if ok else "violated")
    u = projection_norms(model, lag, q)[1:]
    lemma = {
        "b=1": lemma61_check(np.ones_like(u), u, q, b_rule="one"),
        "b=log(n+1)": lemma61_check(np.log1p(n), u, q, b_rule="log"),
    }
    return ProjectionReport(q, j, pn, series, lemma,
                            {sid: (index[sid], t) for sid, t in terms.items()})
