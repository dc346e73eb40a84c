"""Coefficient sequences (a_i) of linear processes and their window sums.

The central quantities are

    c_{n,j} = a_{1-j} + ... + a_{n-j},      v_n^2 = sum_j c_{n,j}^2,
    s_n^2   = n * (sum_{|i|<=n} a_i)^2,      b_j   = a_0 + ... + a_j.

Window sums are kept explicitly on a finite window of j.  For kinds whose
coefficients have a smooth power-law type tail (everything except the
finite-support and alternating kinds) the contribution of the discarded j is
not dropped: it is integrated by a midpoint Euler-Maclaurin rule, so
``v_squared`` is accurate even for long-memory sequences whose discarded mass
never becomes negligible at any feasible window size.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, NumericalError, TruncationError

DEFAULT_REL_TOL = 1e-8
PAST_FACTOR = 2
MIN_FAR = 64

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)

KINDS = ("fractional", "power_diff", "power_tail", "log_damped",
         "alternating_heyde", "harmonic", "dirac", "finite_ma", "custom")


@dataclass(frozen=True)
class CoefficientModel:
    """A rule producing the coefficients (a_i).

    Build instances with the constructor functions of this module
    (:func:`fractional`, :func:`harmonic`, ...) or :func:`from_config`.

    Attributes
    ----------
    kind : str
        One of :data:`KINDS`.
    params : tuple of (name, value) pairs
    causal : bool
        True when a_i = 0 for every i < 0.
    analytic_beta : float or None
        Regular-variation exponent of v_n^2 when known in closed form.
    analytic_h : str or None
        Description of the slowly varying factor h in v_n^2 ~ n^beta h(n).
    """

    kind: str
    params: tuple = ()
    causal: bool = True
    analytic_beta: float = None
    analytic_h: str = None
    rule: object = field(default=None, repr=False)
    support: tuple = None
    tail: object = field(default=None, repr=False)
    left_tail: object = field(default=None, repr=False)

    def param(self, name):
        return dict(self.params)[name]

    def describe(self):
        return ";".join(f"{k}={v}" for k, v in self.params)

    # -- support -----------------------------------------------------------
    @property
    def bounds(self):
        """(lo, hi) index bounds of the support; infinite ends are +-inf."""
        if self.kind == "dirac":
            return 0, 0
        if self.kind == "finite_ma":
            return 0, len(self.param("values")) - 1
        if self.kind == "custom" and self.support is not None:
            return self.support
        lo = 0 if self.causal else -math.inf
        return lo, math.inf

    @property
    def finite_support(self):
        lo, hi = self.bounds
        return math.isfinite(lo) and math.isfinite(hi)

    @property
    def has_smooth_tail(self):
        """True when the far coefficients have a smooth continuous extension."""
        if self.finite_support:
            return False
        if self.kind == "custom":
            return self.tail is not None and (self.causal or self.left_tail is not None)
        return True

    # -- values ------------------------------------------------------------
    def values_at(self, idx):
        """Vectorised a_i for an integer array ``idx``."""
        idx = np.asarray(idx, dtype=np.int64)
        out = np.zeros(idx.shape, dtype=float)
        lo, hi = self.bounds
        mask = (idx >= lo) & (idx <= hi)
        if not mask.any():
            return out
        i = idx[mask]
        out[mask] = _KIND_VALUES[self.kind](self, i)
        return out

    def values(self, lo, hi):
        """a_i for lo <= i <= hi."""
        return self.values_at(np.arange(lo, hi + 1, dtype=np.int64))

    def right_tail(self, x):
        """Smooth extension of a_i for large positive i (array in, array out)."""
        x = np.asarray(x, dtype=float)
        return _KIND_TAILS[self.kind](self, x)

    def left_tail_values(self, x):
        """Smooth extension of a_{-i} for large positive i."""
        x = np.asarray(x, dtype=float)
        if self.causal:
            return np.zeros_like(x)
        if self.kind == "harmonic":
            return 1.0 / x
        return self.left_tail(x)

    def abs_envelope(self, x):
        """Smooth |a_i| envelope for large positive i."""
        if self.kind == "alternating_heyde":
            return _u_values(self, np.asarray(x, dtype=float))
        return np.abs(self.right_tail(x))


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


# -- constructors -------------------------------------------------------------
def fractional(d):
    """(1 - B)^{-d} coefficients, 0 < d < 1/2."""
    _check(0 < d < 0.5, f"fractional: d must lie in (0, 1/2), got {d}")
    return CoefficientModel("fractional", (("d", float(d)),), True,
                            2 * d + 1, "constant")


def power_diff(alpha):
    """a_0 = 1, a_i = (i+1)^-alpha - i^-alpha; coefficients sum to zero."""
    _check(0 < alpha < 0.5, f"power_diff: alpha must lie in (0, 1/2), got {alpha}")
    return CoefficientModel("power_diff", (("alpha", float(alpha)),), True,
                            1 - 2 * alpha, "constant")


def power_tail(alpha):
    """a_0 = 1, a_i = i^-alpha (slowly varying factor taken as 1)."""
    _check(0.5 < alpha < 1, f"power_tail: alpha must lie in (1/2, 1), got {alpha}")
    return CoefficientModel("power_tail", (("alpha", float(alpha)),), True,
                            3 - 2 * alpha, "constant")


def log_damped(alpha):
    """a_0 = 1, a_i = i^-1/2 (1 + log i)^-alpha, alpha > 1/2."""
    _check(alpha > 0.5, f"log_damped: alpha must exceed 1/2, got {alpha}")
    return CoefficientModel("log_damped", (("alpha", float(alpha)),), True,
                            2.0, f"(log n)^(1-2*{alpha})/(2*{alpha}-1)")


def alternating_heyde(u="power", p=0.8):
    """a_0 = 1, a_n = (-1)^n u_n for n >= 1.

    ``u="power"`` uses u_n = n^-p with 1/2 < p <= 1; ``u="sqrt_log"`` uses
    u_n = 1 / (sqrt(n) log(n+1)).  Both have sum u_n = inf and sum u_n^2 < inf.
    """
    if u == "power":
        _check(0.5 < p <= 1, f"alternating_heyde: p must lie in (1/2, 1], got {p}")
        params = (("u", "power"), ("p", float(p)))
    elif u == "sqrt_log":
        params = (("u", "sqrt_log"),)
    else:
        raise ConfigError(f"alternating_heyde: unknown u rule {u!r}")
    return CoefficientModel("alternating_heyde", params, True, 1.0, "constant")


def harmonic():
    """a_0 = 1, a_i = 1/|i| for i != 0 (two-sided, not summable)."""
    return CoefficientModel("harmonic", (), False, 1.0, "4 log^2 n")


def dirac():
    return CoefficientModel("dirac", (), True, 1.0, "constant")


def finite_ma(values):
    vals = tuple(float(v) for v in values)
    _check(len(vals) >= 1, "finite_ma: need at least one coefficient")
    beta = 1.0 if abs(sum(vals)) > 0 else None
    return CoefficientModel("finite_ma", (("values", vals),), True, beta, "constant")


def custom(rule, causal=True, support=None, tail=None, left_tail=None,
           name="custom", analytic_beta=None):
    """User rule ``rule(idx_array) -> values``.

    Either a finite ``support=(lo, hi)`` or a smooth ``tail`` (and
    ``left_tail`` for non-causal rules) must be declared so window sums can be
    truncated with a controlled error.
    """
    _check(callable(rule), "custom: rule must be callable")
    if support is not None:
        lo, hi = support
        _check(lo <= hi, "custom: empty support")
        if causal:
            _check(lo >= 0, "custom: causal rule with negative support")
        support = (int(lo), int(hi))
    elif tail is None or (not causal and left_tail is None):
        raise ConfigError("custom: infinite support needs tail (and left_tail "
                          "when non-causal) extensions")
    return CoefficientModel("custom", (("name", name),), causal, analytic_beta,
                            None, rule=rule, support=support, tail=tail,
                            left_tail=left_tail)


def from_config(record):
    """Build a model from a configuration record such as
    ``{"kind": "fractional", "d": 0.25}``."""
    rec = dict(record)
    kind = rec.pop("kind", None)
    builders = {
        "fractional": lambda r: fractional(r["d"]),
        "power_diff": lambda r: power_diff(r["alpha"]),
        "power_tail": lambda r: power_tail(r["alpha"]),
        "log_damped": lambda r: log_damped(r["alpha"]),
        "alternating_heyde": lambda r: alternating_heyde(r.get("u", "power"),
                                                         r.get("p", 0.8)),
        "harmonic": lambda r: harmonic(),
        "dirac": lambda r: dirac(),
        "finite_ma": lambda r: finite_ma(r["values"]),
    }
    if kind not in builders:
        raise ConfigError(f"unknown coefficient kind {kind!r}")
    try:
        return builders[kind](rec)
    except KeyError as exc:
        raise ConfigError(f"{kind}: missing parameter {exc.args[0]!r}") from None


# -- per-kind values ----------------------------------------------------------
@lru_cache(maxsize=32)
def _fractional_table(d, size):
    ratios = (np.arange(1, size, dtype=float) - 1 + d) / np.arange(1, size, dtype=float)
    return np.concatenate(([1.0], np.cumprod(ratios)))


def _fractional_values(model, i):
    size = 1 << max(int(i.max()) + 1, 1).bit_length()
    return _fractional_table(model.param("d"), size)[i]


def _power_diff_values(model, i):
    alpha = model.param("alpha")
    out = np.ones(i.shape)
    pos = i > 0
    x = i[pos].astype(float)
    out[pos] = x ** -alpha * np.expm1(-alpha * np.log1p(1.0 / x))
    return out


def _power_tail_values(model, i):
    out = np.ones(i.shape)
    pos = i > 0
    out[pos] = i[pos].astype(float) ** -model.param("alpha")
    return out


def _log_damped_values(model, i):
    out = np.ones(i.shape)
    pos = i > 0
    x = i[pos].astype(float)
    out[pos] = x ** -0.5 * (1.0 + np.log(x)) ** -model.param("alpha")
    return out


def _u_values(model, x):
    if model.param("u") == "power":
        return x ** -model.param("p")
    return 1.0 / (np.sqrt(x) * np.log(x + 1.0))


def _alternating_values(model, i):
    out = np.ones(i.shape)
    pos = i > 0
    sign = np.where(i[pos] % 2 == 0, 1.0, -1.0)
    out[pos] = sign * _u_values(model, i[pos].astype(float))
    return out


def _harmonic_values(model, i):
    out = np.ones(i.shape)
    nz = i != 0
    out[nz] = 1.0 / np.abs(i[nz]).astype(float)
    return out


def _dirac_values(model, i):
    return (i == 0).astype(float)


def _finite_ma_values(model, i):
    return np.asarray(model.param("values"))[i]


def _custom_values(model, i):
    return np.asarray(model.rule(i), dtype=float)


_KIND_VALUES = {
    "fractional": _fractional_values,
    "power_diff": _power_diff_values,
    "power_tail": _power_tail_values,
    "log_damped": _log_damped_values,
    "alternating_heyde": _alternating_values,
    "harmonic": _harmonic_values,
    "dirac": _dirac_values,
    "finite_ma": _finite_ma_values,
    "custom": _custom_values,
}


def _no_tail(model, x):
    raise NumericalError(f"{model.kind}: no smooth tail extension")


_KIND_TAILS = {
    "fractional": lambda m, x: 1.0 / (special.poch(x + m.param("d"), 1 - m.param("d"))
                                      * special.gamma(m.param("d"))),
    "power_diff": lambda m, x: x ** -m.param("alpha")
    * np.expm1(-m.param("alpha") * np.log1p(1.0 / x)),
    "power_tail": lambda m, x: x ** -m.param("alpha"),
    "log_damped": lambda m, x: x ** -0.5 * (1.0 + np.log(x)) ** -m.param("alpha"),
    "harmonic": lambda m, x: 1.0 / x,
    "alternating_heyde": _no_tail,
    "dirac": _no_tail,
    "finite_ma": _no_tail,
    "custom": lambda m, x: m.tail(x) if m.tail is not None else _no_tail(m, x),
}


def coeff(model, i):
    """Single coefficient a_i."""
    return float(model.values_at(np.array([i]))[0])


def partial_b(model, j):
    """b_j = a_0 + ... + a_j (0 for j < 0)."""
    if j < 0:
        return 0.0
    return float(np.sum(model.values(0, j)))


def coefficient_sum(model):
    """A = sum_i a_i (inf when the series diverges to +inf)."""
    if model.finite_support:
        lo, hi = model.bounds
        return float(np.sum(model.values(lo, hi)))
    if model.kind == "power_diff":
        return 0.0
    if model.kind == "alternating_heyde":
        return _alternating_total(model)
    if model.kind in ("fractional", "power_tail", "log_damped", "harmonic"):
        return math.inf
    raise NumericalError("coefficient_sum: unknown for this custom rule")


def _alternating_total(model, n0=1 << 16, depth=24):
    # Euler-van Wijngaarden style repeated averaging of consecutive partial sums.
    vals = model.values(0, n0 + depth)
    partial = np.cumsum(vals)[n0:]
    for _ in range(depth):
        partial = 0.5 * (partial[1:] + partial[:-1])
    return float(partial[0])


# -- tails of squared coefficients --------------------------------------------
LOG_SPAN = 30.0


def _square_integral(model, side, x):
    """Leading-order integral of a(t)^2 over t > x for huge x."""
    kind = model.kind
    if kind == "harmonic":
        return 1.0 / x
    if side == "future":
        return _square_integral_fit(model.left_tail_values, x)
    if kind == "fractional":
        d = model.param("d")
        return x ** (2 * d - 1) / ((1 - 2 * d) * special.gamma(d) ** 2)
    if kind == "power_diff":
        alpha = model.param("alpha")
        return alpha ** 2 * x ** (-2 * alpha - 1) / (2 * alpha + 1)
    if kind == "power_tail":
        alpha = model.param("alpha")
        return x ** (1 - 2 * alpha) / (2 * alpha - 1)
    if kind == "log_damped":
        alpha = model.param("alpha")
        return (1 + math.log(x)) ** (1 - 2 * alpha) / (2 * alpha - 1)
    if kind == "alternating_heyde":
        if model.param("u") == "power":
            p = model.param("p")
            return x ** (1 - 2 * p) / (2 * p - 1)
        return 1.0 / math.log(x + 1.0)
    return _square_integral_fit(model.right_tail, x)


def _square_integral_fit(fn, x):
    # Local power-law fit a^2 ~ C t^-q at x (needs q > 1).
    f1 = float(fn(np.array([x]))[0]) ** 2
    f2 = float(fn(np.array([2 * x]))[0]) ** 2
    if f1 == 0.0:
        return 0.0
    q = math.log(f1 / f2) / math.log(2.0)
    if q <= 1.0:
        raise NumericalError("declared tail does not decay fast enough")
    return f1 * x / (q - 1)


def _midpoint_tail(fn, start):
    """sum_{i >= start} fn(i) for smooth decreasing fn, via the midpoint rule.

    Returns (value, error estimate).
    """
    x0 = start - 0.5
    val, err = integrate.quad(lambda u: float(fn(np.array([x0 * math.exp(u)]))[0])
                              * x0 * math.exp(u), 0, LOG_SPAN,
                              epsabs=0, epsrel=1e-12, limit=400)
    far = x0 * math.exp(LOG_SPAN)
    f1 = float(fn(np.array([far]))[0])
    f2 = float(fn(np.array([2 * far]))[0])
    if f1 > 0:
        q = math.log(f1 / f2) / math.log(2.0)
        if q <= 1.0:
            q = 1.0 + 1.0 / math.log(far)
        val += f1 * far / (q - 1)
    h = 1e-3 * x0
    deriv = float((fn(np.array([x0 + h])) - fn(np.array([x0 - h])))[0]) / (2 * h)
    corr = deriv / 24.0
    return val + corr, err + abs(corr) / x0 ** 2


def square_tail(model, k):
    """sum_{|i| > k} a_i^2 (k >= 0)."""
    k = int(k)
    lo, hi = model.bounds
    if model.finite_support:
        idx = np.arange(lo, hi + 1)
        vals = model.values(lo, hi)
        return float(np.sum(vals[np.abs(idx) > k] ** 2))
    start = max(k + 1, MIN_FAR)
    total = 0.0
    if start > k + 1:
        total += float(np.sum(model.values(k + 1, start - 1) ** 2))
        if not model.causal:
            total += float(np.sum(model.values(-(start - 1), -(k + 1)) ** 2))
    right, _ = _midpoint_tail(lambda x: model.abs_envelope(x) ** 2, start)
    total += right
    if not model.causal:
        left, _ = _midpoint_tail(lambda x: model.left_tail_values(x) ** 2, start)
        total += left
    return total


# -- window sums --------------------------------------------------------------
@dataclass(frozen=True)
class WindowSums:
    """Window sums c_{n,j} on [j_lo, j_hi] plus the far remainder.

    Attributes
    ----------
    tail_mass : float
        Squared mass of the c_{n,j} outside the explicit window, obtained by
        quadrature and included in :func:`v_squared` (0 for finite support).
    tail_error : float
        Error estimate of ``tail_mass``.
    """

    n: int
    j_lo: int
    j_hi: int
    c: np.ndarray = field(repr=False)
    tail_mass: float
    tail_error: float

    @property
    def j(self):
        return np.arange(self.j_lo, self.j_hi + 1)

    @property
    def retained(self):
        return float(np.dot(self.c, self.c))


def window_layout(model, n, past_factor=PAST_FACTOR):
    """Explicit window (j_lo, j_hi) and far-field offsets (M_past, M_future).

    Far past means j <= -M_past, far future j >= n + M_future + 1; an offset
    of ``None`` means that side has no far field.
    """
    lo, hi = model.bounds
    if model.finite_support:
        return 1 - int(hi), n - int(lo), None, None
    m = max(past_factor * n, MIN_FAR)
    if model.causal:
        return 1 - m, n, m, None
    return 1 - m, n + m, m, m


def explicit_window(model, n, j_lo, j_hi):
    """c_{n,j} for j_lo <= j <= j_hi via prefix sums of a."""
    i_lo, i_hi = 1 - j_hi, n - j_lo
    lo, hi = model.bounds
    i_lo = int(max(i_lo, lo)) if math.isfinite(lo) else i_lo
    i_hi = int(min(i_hi, hi)) if math.isfinite(hi) else i_hi
    j = np.arange(j_lo, j_hi + 1)
    if i_hi < i_lo:
        return np.zeros(j.shape)
    prefix = np.concatenate(([0.0], np.cumsum(model.values(i_lo, i_hi))))

    def upto(m):
        return prefix[np.clip(m - i_lo + 1, 0, len(prefix) - 1)]

    return upto(n - j) - upto(-j)


@dataclass(frozen=True)
class FarGram:
    """Gram matrix of far-field features.

    The far part of sum_j c_{k,j} xi_j equals, in distribution for Gaussian
    xi, ``const[0] - (-1)^k W(k)`` for the alternating kind (one constant
    feature) and ``W(k)`` otherwise, where W(k) is the feature at node k.
    Feature order is constants first, then one feature per node.
    """

    gram: np.ndarray
    error: float
    n_const: int


def _alternating_a(model, x):
    # Euler-Boole: sum_{i >= x} (-1)^i u_i = (-1)^x (u/2 - u'/4 + u'''/48 - ...)
    u = lambda t: _u_values(model, t)
    h1 = 1e-3 * x
    d1 = (u(x + h1) - u(x - h1)) / (2 * h1)
    h3 = 0.05 * x
    d3 = (u(x + 2 * h3) - 2 * u(x + h3) + 2 * u(x - h3) - u(x - 2 * h3)) / (2 * h3 ** 3)
    return u(x) / 2 - d1 / 4 + d3 / 48


def _features(model, side, ks):
    """Feature map x -> vector, its asymptotic weights and constant count."""
    if model.kind == "alternating_heyde":
        def phi(x):
            return _alternating_a(model, np.concatenate(([x], x + ks)))
        return phi, np.full(len(ks) + 1, 0.5), 1

    fn = model.right_tail if side == "past" else model.left_tail_values
    half = ks / 2.0

    def deriv(x):
        h = 1e-4 * x
        return (fn(x + h) - fn(x - h)) / (2 * h)

    def phi(x):
        # F_k(x) = sum over k consecutive integers next to x, midpoint rule
        if side == "past":
            lower, upper = x - 0.5, x + ks - 0.5
        else:
            lower, upper = x - ks - 0.5, x - 0.5
        t = (lower + half)[:, None] + half[:, None] * _GL_X[None, :]
        val = half * (fn(t) @ _GL_W)
        return val - (deriv(upper) - deriv(lower)) / 24.0

    return phi, ks.astype(float), 0


def far_gram(model, side, ks, offset, n):
    """Far-field Gram matrix for window lengths ``ks`` (see :class:`FarGram`).

    ``side`` is "past" (j <= -offset) or "future" (j >= n + offset + 1).
    The ks may be non-integer; the inner sums use a smooth extension of a.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    return _far_gram_cached(model, side, tuple(ks.tolist()), int(offset), int(n))


@lru_cache(maxsize=256)
def _far_gram_cached(model, side, ks, offset, n):
    ks = np.asarray(ks)
    x0 = offset + 0.5 if side == "past" else n + offset + 0.5
    phi, weights, n_const = _features(model, side, ks)

    def integrand(u):
        x = x0 * math.exp(u)
        f = phi(x)
        return np.outer(f, f).ravel() * x

    val, err = integrate.quad_vec(integrand, 0, LOG_SPAN, epsabs=0, epsrel=1e-11,
                                  limit=2000)
    # Beyond x0 * e^LOG_SPAN every feature equals weight * a(x) up to O(k / x).
    far = x0 * math.exp(LOG_SPAN)
    rest = np.outer(weights, weights).ravel() * _square_integral(model, side, far)
    val = val + rest
    err = err + float(np.max(np.abs(rest))) * max(float(np.max(ks)), 1.0) / far
    h = 1e-3 * x0
    fp, fm = phi(x0 + h), phi(x0 - h)
    corr = (np.outer(fp, fp) - np.outer(fm, fm)) / (2 * h) / 24.0
    size = len(weights)
    gram = val.reshape(size, size) + corr
    gram = 0.5 * (gram + gram.T)
    # next midpoint Euler-Maclaurin term is O(corr * q^2 / x0^2) for a ~ x^-q
    return FarGram(gram, float(err + np.max(np.abs(corr)) / x0 ** 2), n_const)


def far_combination(model, k):
    """Coefficients turning [constants, W(k)] into the far part at integer k."""
    if model.kind == "alternating_heyde":
        return np.array([1.0, -(-1.0) ** (int(k) % 2)])
    return np.array([1.0])


@lru_cache(maxsize=4096)
def _window_sums_cached(model, n, rel_tol, past_factor):
    j_lo, j_hi, mp, mf = window_layout(model, n, past_factor)
    c = explicit_window(model, n, j_lo, j_hi)
    mass, err = 0.0, 0.0
    for side, off in (("past", mp), ("future", mf)):
        if off is None:
            continue
        fg = far_gram(model, side, [n], off, n)
        w = far_combination(model, n)
        mass += float(w @ fg.gram @ w)
        err += fg.error * float(np.sum(np.abs(w))) ** 2
    total = float(np.dot(c, c)) + mass
    if err > rel_tol * total:
        raise TruncationError(
            f"{model.kind}: tail quadrature error {err:.3g} exceeds "
            f"rel_tol * v_n^2 = {rel_tol * total:.3g}", tail_mass=err)
    return WindowSums(n, j_lo, j_hi, c, mass, err)


def window_sums(model, n, rel_tol=DEFAULT_REL_TOL, past_factor=PAST_FACTOR):
    """All c_{n,j}: explicit on a window, far remainder by quadrature.

    Raises :class:`TruncationError` when the estimated error of the far
    remainder exceeds ``rel_tol * v_n^2``.
    """
    if n < 1:
        raise ConfigError("window_sums: n must be >= 1")
    if not 0 < rel_tol < 1:
        raise ConfigError("window_sums: rel_tol must lie in (0, 1)")
    return _window_sums_cached(model, int(n), float(rel_tol), int(past_factor))


def v_squared(ws):
    """v_n^2 = sum_j c_{n,j}^2 (explicit window plus far remainder)."""
    total = ws.retained + ws.tail_mass
    if not math.isfinite(total):
        raise NumericalError("v_n^2 is not finite")
    return total


def v2(model, n, rel_tol=DEFAULT_REL_TOL):
    """Shortcut: v_n^2 for a model (0 for n = 0)."""
    if n == 0:
        return 0.0
    return v_squared(window_sums(model, n, rel_tol))


def s_squared(model, n):
    """s_n^2 = n (sum_{i=-n}^{n} a_i)^2."""
    return n * float(np.sum(model.values(-n, n))) ** 2


# -- regular variation --------------------------------------------------------
@dataclass
class BetaEstimate:
    beta_hat: float
    n_grid: np.ndarray
    v2: np.ndarray
    local_slopes: np.ndarray
    ratios: dict


RATIO_TS = tuple(round(0.1 * k, 1) for k in range(1, 10))


def variance_ratio(model, n, t, rel_tol=DEFAULT_REL_TOL):
    """v_{[nt]}^2 / v_n^2.  Same code path as ``covariance_limit`` at s = t."""
    return covariance_limit(model, n, t, t, 1.0, rel_tol)[0]


def beta_estimate(model, n_grid, rel_tol=DEFAULT_REL_TOL):
    """OLS slope of log v_n^2 against log n over a dyadic grid."""
    n_grid = np.asarray(sorted(int(n) for n in n_grid))
    if len(n_grid) < 4 or n_grid[-1] < 8 * n_grid[0]:
        raise ConfigError("beta_estimate: need >= 4 grid points over >= 3 octaves")
    vals = np.array([v2(model, int(n), rel_tol) for n in n_grid])
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise NumericalError("beta_estimate: non-finite or non-positive v_n^2")
    x, y = np.log(n_grid), np.log(vals)
    slope = np.polyfit(x, y, 1)[0]
    local = np.diff(y) / np.diff(x)
    top = int(n_grid[-1])
    ratios = {t: variance_ratio(model, top, t, rel_tol) for t in RATIO_TS}
    return BetaEstimate(float(slope), n_grid, vals, local, ratios)


def covariance_limit(model, n, s, t, beta, rel_tol=DEFAULT_REL_TOL):
    """Deterministic covariance sum_j c_{[ns],j} c_{[nt],j} / v_n^2 and its
    fractional-Brownian target (s^beta + t^beta - (t-s)^beta) / 2.

    Uses c_{[nt],j} - c_{[ns],j} = c_{[nt]-[ns], j-[ns]}, which turns the cross
    sum into (v_{[ns]}^2 + v_{[nt]}^2 - v_{[nt]-[ns]}^2) / 2 exactly.
    """
    if not 0 < s <= t <= 1:
        raise ConfigError("covariance_limit: need 0 < s <= t <= 1")
    ns, nt = int(math.floor(n * s)), int(math.floor(n * t))
    vn = v2(model, n, rel_tol)
    cross = 0.5 * (v2(model, ns, rel_tol) + v2(model, nt, rel_tol)
                   - v2(model, nt - ns, rel_tol))
    target = 0.5 * (s ** beta + t ** beta - (t - s) ** beta)
    return cross / vn, target


# -- condition audits ---------------------------------------------------------
@dataclass
class AuditReport:
    model: str
    n_grid: np.ndarray
    trajectories: dict
    verdicts: dict

    def rows(self):
        for name, traj in self.trajectories.items():
            for n, val in zip(self.n_grid, traj):
                yield name, int(n), float(val), self.verdicts[name]


def trend_verdict(values, target, n_grid=None):
    """Numeric trend verdict: "satisfied", "violated" or "inconclusive".

    ``target`` is "zero" (quantity must tend to 0), "bounded", "finite"
    (nondecreasing partial sums of a series must converge) or "infinite"
    (partial sums must diverge).  ``n_grid`` lets the "zero" test accept
    decay as slow as 1 / log n.
    """
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        return "violated"
    half = v[len(v) // 2:]
    if target == "zero":
        a = np.abs(half)
        if np.all(a <= 1e-12):
            return "satisfied"
        dec = -np.diff(a)
        if len(dec) < 2:
            return "inconclusive"
        if np.all(dec < 0):
            return "violated"
        if not np.all(dec > 0):
            return "inconclusive"
        if n_grid is not None:
            # decay at least like a power of 1 / log n
            ll = np.log(np.log(np.asarray(n_grid, dtype=float)[len(v) // 2:]))
            if (math.log(a[-1]) - math.log(a[0])) / (ll[-1] - ll[0]) <= -0.6:
                return "satisfied"
        r = dec[-1] / dec[-2]
        if r >= 0.95:
            return "inconclusive"
        # geometric extrapolation of the limit; 0 for a pure power decay
        limit = a[-1] - dec[-1] * r / (1 - r)
        if limit <= 0.25 * a[-1]:
            return "satisfied"
        if limit >= 0.5 * a[-1]:
            return "violated"
        return "inconclusive"
    if target == "bounded":
        a = np.abs(half) + 1e-300
        growth = np.diff(np.log(a))
        if np.all(growth <= 0.05):
            return "satisfied"
        if np.all(growth > 0.15):
            return "violated"
        return "inconclusive"
    inc = np.diff(v)
    if target == "finite":
        if np.all(np.abs(inc) <= 1e-14 * max(1.0, abs(v[-1]))):
            return "satisfied"
        tail = inc[len(inc) // 2:]
        if np.all(tail > 0) and np.all(tail[1:] <= 0.9 * tail[:-1]):
            return "satisfied"
        if np.all(tail[1:] >= tail[:-1]):
            return "violated"
        return "inconclusive"
    if target == "infinite":
        tail = inc[len(inc) // 2:]
        if np.all(tail > 0) and np.all(tail[1:] >= 0.5 * tail[:-1]):
            return "satisfied"
        return "violated" if verdict_converges(tail) else "inconclusive"
    raise ConfigError(f"unknown trend target {target!r}")


def verdict_converges(inc):
    return np.all(inc[1:] <= 0.9 * inc[:-1])


def _tail_sums(model, n_max):
    """r_n = sum_{k >= n} a_k for n = 1..n_max and the left analogue."""
    total = coefficient_sum(model)
    vals = model.values(0, n_max)
    if math.isfinite(total):
        right = total - np.cumsum(vals)[:-1]
    else:
        right = np.full(n_max, math.inf)
    if model.causal:
        left = np.zeros(n_max)
    elif model.finite_support:
        lo, _ = model.bounds
        neg = model.values(min(lo, -n_max), -1)[::-1]
        left = np.cumsum(neg[::-1])[::-1][:n_max]
    else:
        left = np.full(n_max, math.inf)
    return right, left


def condition_audit(model, n_max=1 << 14):
    """Trajectories of the coefficient conditions over a dyadic grid.

    * "wu_woodroofe_13": sum_{k<n} b_k^2 (must diverge) for causal models;
    * "wu_woodroofe_14": sum_{j>=0} (b_{n+j} - b_j)^2 / sum_{k<n} b_k^2 -> 0;
    * "heyde_right"/"heyde_left": partial sums of sum_n (sum_{k>=n} a_k)^2 and
      the mirrored series (must converge);
    * "dmv_ratio": sum_{|i|<=n} |a_i| / |sum_{|i|<=n} a_i| (must stay bounded);
    * "dmv_tail": sum_{k<=n} sqrt(sum_{|i|>=k} a_i^2) / s_n -> 0.
    """
    grid = 2 ** np.arange(4, int(math.log2(n_max)) + 1)
    traj, verdicts = {}, {}
    if model.causal:
        b = np.cumsum(model.values(0, int(grid[-1])))
        cum_b2 = np.cumsum(b ** 2)
        num = []
        for n in grid:
            ws = window_sums(model, int(n))
            past = ws.c[ws.j <= 0]
            num.append(float(np.dot(past, past)) + ws.tail_mass)
        den = cum_b2[grid - 1]
        traj["wu_woodroofe_13"] = den
        traj["wu_woodroofe_14"] = np.array(num) / den
        verdicts["wu_woodroofe_13"] = trend_verdict(den, "infinite")
        verdicts["wu_woodroofe_14"] = trend_verdict(traj["wu_woodroofe_14"], "zero",
                                                    grid)
    try:
        right, left = _tail_sums(model, int(grid[-1]))
    except NumericalError:
        right = left = None
    if right is not None and np.all(np.isfinite(right)):
        traj["heyde_right"] = np.cumsum(right ** 2)[grid - 1]
        verdicts["heyde_right"] = trend_verdict(traj["heyde_right"], "finite")
    if left is not None and np.all(np.isfinite(left)):
        traj["heyde_left"] = np.cumsum(left ** 2)[grid - 1]
        verdicts["heyde_left"] = trend_verdict(traj["heyde_left"], "finite")
    ratio, tailr = [], []
    nmax = int(grid[-1])
    a_sym = model.values(-nmax, nmax)
    sq_beyond = square_tail(model, nmax)
    # T(k) = sum_{|i| >= k} a_i^2 for k = 1..nmax
    pos = a_sym[nmax + 1:] ** 2
    neg = a_sym[:nmax][::-1] ** 2
    tsq = np.cumsum((pos + neg)[::-1])[::-1] + sq_beyond
    cum_sqrt = np.cumsum(np.sqrt(np.maximum(tsq, 0.0)))
    for n in grid:
        seg = a_sym[nmax - n: nmax + n + 1]
        total = float(np.sum(seg))
        ratio.append(np.sum(np.abs(seg)) / abs(total) if total != 0 else math.inf)
        sn = math.sqrt(n) * abs(total)
        tailr.append(cum_sqrt[n - 1] / sn if sn > 0 else math.inf)
    traj["dmv_ratio"] = np.array(ratio)
    traj["dmv_tail"] = np.array(tailr)
    verdicts["dmv_ratio"] = trend_verdict(traj["dmv_ratio"], "bounded")
    verdicts["dmv_tail"] = trend_verdict(traj["dmv_tail"], "zero", grid)
    return AuditReport(model.kind, grid, traj, verdicts)
