"""Rate schedule d_n for isotonic estimators and the limit constants kappa.

With h slowly varying and beta in (0, 2]::

    L(x)  = h(x^{2/(4-beta)})^{-1/2}
    L*(x) L(x L*(x)) = 1
    d_n   = n^{-(2-beta)/(4-beta)} L*(n)^{2/(4-beta)}

L*(n) is found by the fixed-point iteration x -> 1 / L(n x) started at 1.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from .. import coeffs as cf
from ..errors import ConfigError, ConvergenceError

FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITER = 200
RESIDUAL_TOL = 1e-8


def _rate_exponent(beta):
    """(2 - beta) / (4 - beta), shared by every theorem constant."""
    return (2.0 - beta) / (4.0 - beta)


def rate_exponent_from_hurst(H):
    """(1 - H) / (2 - H), written directly in H (used to check the identity
    with :func:`_rate_exponent` at beta = 2H)."""
    return (1.0 - H) / (2.0 - H)


# -- slowly varying factors ---------------------------------------------------
@dataclass(frozen=True)
class HRule:
    """A positive function h on [1, inf) with a description."""

    name: str
    fn: object

    def __call__(self, x):
        return float(self.fn(max(float(x), 1.0)))


def constant_h(value):
    if not value > 0:
        raise ConfigError("constant h must be positive")
    return HRule(f"constant({value:g})", lambda x: value)


def harmonic_h():
    """h(x) = (sum_{|i|<=x} a_i)^2 for a_0 = 1, a_i = 1/|i|, extended to real
    x through the digamma function: (1 + 2 (psi(x + 1) + gamma))^2."""
    return HRule("harmonic", lambda x: (1.0 + 2.0 * (special.digamma(x + 1.0)
                                                     + np.euler_gamma)) ** 2)


def _interpolated(fn_int):
    cache = {}

    def value(k):
        if k not in cache:
            cache[k] = fn_int(k)
        return cache[k]

    def h(x):
        k = int(math.floor(x))
        w = x - k
        if w == 0.0:
            return value(k)
        return (1.0 - w) * value(k) + w * value(k + 1)

    return h


def model_h(coeff, beta, normalizer="v_n"):
    """h read off a coefficient model, linear between integers.

    ``normalizer="v_n"`` gives h(k) = v_k^2 k^{-beta}; ``"s_n"`` gives
    h(k) = (sum_{|i|<=k} a_i)^2 (then beta must be 1).
    """
    if normalizer == "v_n":
        fn = lambda k: cf.v2(coeff, k) / k ** beta
    elif normalizer == "s_n":
        if beta != 1:
            raise ConfigError("the s_n normalizer goes with beta = 1")
        fn = lambda k: cf.s_squared(coeff, k) / k
    else:
        raise ConfigError(f"unknown normalizer {normalizer!r}")
    return HRule(f"{coeff.kind}:{normalizer}", _interpolated(fn))


def as_h_rule(h):
    if isinstance(h, HRule):
        return h
    if isinstance(h, (int, float)):
        return constant_h(float(h))
    if h == "harmonic":
        return harmonic_h()
    if callable(h):
        return HRule(getattr(h, "__name__", "callable"), h)
    raise ConfigError(f"cannot interpret h rule {h!r}")


# -- schedule -----------------------------------------------------------------
@dataclass
class RateSchedule:
    """d_n and its ingredients on an n grid.

    ``calibration`` holds d_n^{-2} n^{-1} m_{[n d_n]} with
    m_k = (k^beta h(k))^{1/2}; it tends to 1 when the schedule is right.
    """

    beta: float
    h: str
    n: np.ndarray
    L_star: np.ndarray
    ell: np.ndarray
    d_n: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    calibration: np.ndarray

    def rows(self):
        for vals in zip(self.n, self.L_star, self.ell, self.d_n, self.residual,
                        self.calibration):
            yield tuple(float(v) if i else int(v) for i, v in enumerate(vals))


def _L(h_rule, beta, x):
    return h_rule(x ** (2.0 / (4.0 - beta))) ** -0.5


def solve_L_star(h_rule, beta, n):
    """Fixed point of x -> 1 / L(n x) from x = 1; returns (x, iterations)."""
    x = 1.0
    trace = []
    for it in range(1, FIXED_POINT_MAX_ITER + 1):
        try:
            new = 1.0 / _L(h_rule, beta, n * x)
        except (OverflowError, ZeroDivisionError):
            new = math.inf
        trace.append(new)
        if not math.isfinite(new) or new <= 0:
            raise ConvergenceError(f"L* fixed point diverged at n = {n}",
                                   trace=trace[-10:])
        if abs(new - x) <= FIXED_POINT_TOL * abs(new):
            return new, it
        x = new
    raise ConvergenceError(f"L* fixed point did not converge at n = {n}",
                           trace=trace[-10:])


def rate_schedule(beta, h_rule, n_grid, m_rule=None):
    """d_n on ``n_grid`` for exponent ``beta`` and slowly varying ``h_rule``.

    ``m_rule(k)`` overrides the normaliser used in the calibration trajectory
    (for instance the exact v_k of a model); by default m_k = (k^beta h(k))^{1/2}.
    """
    if not 0 < beta <= 2:
        raise ConfigError("beta must lie in (0, 2]")
    h_rule = as_h_rule(h_rule)
    n_grid = np.asarray([int(n) for n in n_grid])
    if np.any(n_grid < 2):
        raise ConfigError("n grid must be >= 2")
    if m_rule is None:
        m_rule = lambda k: math.sqrt(k ** beta * h_rule(k))
    exps = _rate_exponent(beta)
    Ls, its, res, ell, dn, cal = [], [], [], [], [], []
    for n in n_grid:
        if not h_rule(n) > 0:
            raise ConfigError(f"h must be positive, h({n}) = {h_rule(n)}")
        x, it = solve_L_star(h_rule, beta, float(n))
        r = abs(x * _L(h_rule, beta, n * x) - 1.0)
        if r > RESIDUAL_TOL:
            raise ConvergenceError(f"L* residual {r:.3g} above {RESIDUAL_TOL}", trace=[r])
        l = x ** (2.0 / (4.0 - beta))
        d = n ** -exps * l
        k = max(1, int(math.floor(n * d)))
        Ls.append(x)
        its.append(it)
        res.append(r)
        ell.append(l)
        dn.append(d)
        cal.append(m_rule(k) / (d * d * n))
    return RateSchedule(beta, h_rule.name, n_grid, np.array(Ls), np.array(ell),
                        np.array(dn), np.array(res), np.array(its), np.array(cal))


# -- theorem constants --------------------------------------------------------
def theorem_kappa(theorem, phi_prime, A=None, beta=None, H=None):
    """Scale constant of the isotonic limit.

    theorem "4.1": 2 (A^2 phi'/2)^{1/3}; "4.2": 2 (phi'/2)^{1/3};
    "4.3": 2 (phi'/2)^{(2-beta)/(4-beta)}; "lemma": 2 (phi'/2)^{(1-H)/(2-H)}.
    All exponents come from one helper, so "4.2" equals "4.3" at beta = 1 and
    "lemma" at H equals "4.3" at beta = 2H exactly.
    """
    if not phi_prime > 0:
        raise ConfigError("phi'(t) must be positive")
    theorem = str(theorem)
    if theorem == "4.1":
        if A is None:
            raise ConfigError("theorem 4.1 needs the coefficient sum A")
        return 2.0 * (0.5 * A * A * phi_prime) ** _rate_exponent(1.0)
    if theorem == "4.2":
        return 2.0 * (0.5 * phi_prime) ** _rate_exponent(1.0)
    if theorem == "4.3":
        if beta is None or not 0 < beta < 2:
            raise ConfigError("theorem 4.3 needs beta in (0, 2)")
        return 2.0 * (0.5 * phi_prime) ** _rate_exponent(beta)
    if theorem == "lemma":
        if H is None or not 0 < H < 1:
            raise ConfigError("the lemma form needs H in (0, 1)")
        return 2.0 * (0.5 * phi_prime) ** _rate_exponent(2.0 * H)
    raise ConfigError(f"unknown theorem {theorem!r}")


def limit_scale(eta, H):
    """(sqrt eta)^{1/(2-H)}: the multiplier of the argmin in the limit."""
    return math.sqrt(eta) ** (1.0 / (2.0 - H))
