"""Isotonic least-squares regression on an equispaced design.

Three independent routes to the fitted values mu_hat:

* :func:`pava`, pool-adjacent-violators with a block stack (O(n));
* :func:`maxmin`, the max-min formula evaluated with prefix sums (reference);
* :func:`gcm`, left derivatives of the greatest convex minorant of the
  cumulative-sum diagram (k, y_1 + ... + y_k), k = 0..n.

All block levels are computed as (P[e] - P[s]) / (e - s) from the same
prefix sums P, so the three routes agree to the last bit whenever they
select the same blocks.
"""
from dataclasses import dataclass
import math

import numba
import numpy as np

from .errors import ConfigError

MAXMIN_CAP = 2000


@dataclass
class IsotonicFit:
    """Result of an isotonic fit.

    ``blocks`` holds (start, end, level) with 0-based inclusive indices;
    ``gcm_knots`` lists the diagram abscissae k (0..n) where the minorant
    touches the cumulative sums.
    """

    n: int
    y: np.ndarray
    mu_hat: np.ndarray
    blocks: list
    gcm_knots: np.ndarray


def _prefix(y):
    return np.concatenate(([0.0], np.cumsum(y)))


@numba.njit(cache=True)
def _pava_core(prefix):
    n = prefix.shape[0] - 1
    starts = np.empty(n + 1, dtype=np.int64)  # block start indices into prefix
    top = 0
    for k in range(n):
        starts[top] = k
        top += 1
        # merge while the previous block level exceeds the last one
        while top > 1:
            s1, s2 = starts[top - 2], starts[top - 1]
            e2 = k + 1
            left = (prefix[s2] - prefix[s1]) / (s2 - s1)
            right = (prefix[e2] - prefix[s2]) / (e2 - s2)
            if left > right:
                top -= 1
            else:
                break
    starts[top] = n
    mu = np.empty(n)
    for b in range(top):
        s, e = starts[b], starts[b + 1]
        level = (prefix[e] - prefix[s]) / (e - s)
        for i in range(s, e):
            mu[i] = level
    return mu, starts[:top + 1].copy()


def _blocks_from_bounds(prefix, bounds):
    out = []
    for s, e in zip(bounds[:-1], bounds[1:]):
        out.append((int(s), int(e) - 1, float((prefix[e] - prefix[s]) / (e - s))))
    return out


def _as_array(y):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or len(y) < 1:
        raise ConfigError("need a non-empty one-dimensional sequence")
    if not np.all(np.isfinite(y)):
        raise ConfigError("observations must be finite")
    return y


def pava(y):
    """Isotonic least-squares fit by pool-adjacent-violators."""
    y = _as_array(y)
    prefix = _prefix(y)
    mu, bounds = _pava_core(prefix)
    return IsotonicFit(len(y), y, mu, _blocks_from_bounds(prefix, bounds), bounds)


def pava_values(y):
    """Fitted values only (fast path for simulations)."""
    return _pava_core(_prefix(np.asarray(y, dtype=float)))[0]


@numba.njit(cache=True)
def _pava_at_core(prefix, k):
    mu, _ = _pava_core(prefix)
    return mu[k]


def maxmin(y):
    """mu_hat_k = max_{i<=k} min_{j>=k} mean(y_i..y_j), by direct evaluation."""
    y = _as_array(y)
    n = len(y)
    if n > MAXMIN_CAP:
        raise ConfigError(f"maxmin is a reference oracle capped at n = {MAXMIN_CAP}; "
                          "use pava")
    prefix = _prefix(y)
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = (prefix[j + 1] - prefix[i]) / (j - i + 1)
    avg = np.where(j >= i, avg, np.nan)
    mu = np.empty(n)
    for k in range(n):
        # rows i <= k, columns j >= k
        mu[k] = np.max(np.min(avg[:k + 1, k:], axis=1))
    bounds = np.concatenate(([0], np.flatnonzero(np.diff(mu) != 0) + 1, [n]))
    return IsotonicFit(n, y, mu, _blocks_from_bounds(prefix, bounds), bounds)


def gcm(x, y):
    """Greatest convex minorant of the points (x_k, y_k).

    Returns (minorant values at x, left derivatives at x, touch indices).
    The left derivative at the first point is NaN.  Collinear points on the
    minorant are kept, so they all count as touch points.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or len(x) < 2 or x.shape != y.shape:
        raise ConfigError("gcm: need at least two points")
    if np.any(np.diff(x) <= 0):
        raise ConfigError("gcm: x must be strictly increasing (no duplicates)")
    hull = _hull(x, y)
    values = np.empty(len(x))
    deriv = np.full(len(x), np.nan)
    for a, b in zip(hull[:-1], hull[1:]):
        slope = (y[b] - y[a]) / (x[b] - x[a])
        values[a:b + 1] = y[a] + slope * (x[a:b + 1] - x[a])
        values[b] = y[b]
        deriv[a + 1:b + 1] = slope
    values[hull[0]] = y[hull[0]]
    return values, deriv, np.asarray(hull)


def _hull(x, y):
    stack = []
    for k in range(len(x)):
        while len(stack) >= 2:
            a, b = stack[-2], stack[-1]
            # pop b when it lies strictly above the chord from a to k
            cross = (x[b] - x[a]) * (y[k] - y[a]) - (y[b] - y[a]) * (x[k] - x[a])
            if cross < 0:
                stack.pop()
            else:
                break
        stack.append(k)
    return stack


def gcm_fit(y):
    """mu_hat from the left derivatives of the GCM of the cumulative sums."""
    y = _as_array(y)
    n = len(y)
    prefix = _prefix(y)
    k = np.arange(n + 1, dtype=float)
    hull = _hull(k, prefix)
    mu = np.empty(n)
    for a, b in zip(hull[:-1], hull[1:]):
        mu[a:b] = (prefix[b] - prefix[a]) / (b - a)
    bounds = np.concatenate(([0], np.flatnonzero(np.diff(mu) != 0) + 1, [n]))
    return IsotonicFit(n, y, mu, _blocks_from_bounds(prefix, bounds), np.asarray(hull))


def knot_index(n, t):
    """1-based knot k with t in ((k-1)/n, k/n] (left-continuous steps)."""
    if not 0 < t <= 1:
        raise ConfigError("t must lie in (0, 1]")
    return min(n, max(1, math.ceil(n * t - 1e-9)))


def fit_phi_hat(y, t_eval):
    """phi_hat_n(t) for the left-continuous step estimator."""
    y = _as_array(y)
    if len(y) < 2:
        raise ConfigError("fit_phi_hat: need n >= 2")
    ts = np.atleast_1d(t_eval)
    mu = pava_values(y)
    out = np.array([mu[knot_index(len(y), float(t)) - 1] for t in ts])
    return float(out[0]) if np.ndim(t_eval) == 0 else out


def phi_hat_batch(Y, t):
    """phi_hat_n(t) for every row of ``Y`` (simulation helper)."""
    Y = np.asarray(Y, dtype=float)
    k = knot_index(Y.shape[1], t) - 1
    return _phi_hat_rows(Y, k)


@numba.njit(cache=True)
def _phi_hat_rows(Y, k):
    out = np.empty(Y.shape[0])
    for r in range(Y.shape[0]):
        prefix = np.empty(Y.shape[1] + 1)
        prefix[0] = 0.0
        acc = 0.0
        for i in range(Y.shape[1]):
            acc += Y[r, i]
            prefix[i + 1] = acc
        out[r] = _pava_at_core(prefix, k)
    return out


@dataclass
class LocalProcess:
    s: np.ndarray
    z: np.ndarray
    derivative_at_zero: float
    direct: float


def local_process(y, t, d_n, s_grid, phi_t):
    """Z_n(s) = d_n^-2 (Y_n(t + d_n s) - Y_n(t) - phi(t) d_n s) on the knots.

    The process is evaluated on the knot lattice s = (k/n - t) / d_n inside
    [min(s_grid), max(s_grid)] where it is piecewise linear, so the left
    derivative at s = 0 of its GCM equals d_n^-1 (phi_hat_n(t) - phi(t)).
    ``z`` is returned at the requested ``s_grid`` by linear interpolation.
    The identity is asserted to 1e-9.
    """
    y = _as_array(y)
    n = len(y)
    s_grid = np.asarray(s_grid, dtype=float)
    if not 0 < t < 1 or d_n <= 0:
        raise ConfigError("local_process: need 0 < t < 1 and d_n > 0")
    if np.any(t + d_n * s_grid < -1e-12) or np.any(t + d_n * s_grid > 1 + 1e-12):
        raise ConfigError("local_process: grid escapes [0, 1]")
    prefix = _prefix(y) / n
    kt = knot_index(n, t)
    # work on the full lattice so the minorant at 0 is exact
    k = np.arange(n + 1)
    s_all = (k / n - kt / n) / d_n
    z_all = (prefix - prefix[kt] - phi_t * (k / n - kt / n)) / d_n ** 2
    _, deriv, _ = gcm(s_all, z_all)
    deriv0 = float(deriv[kt])
    direct = (fit_phi_hat(y, t) - phi_t) / d_n
    if abs(deriv0 - direct) > 1e-9 * max(1.0, abs(direct)):
        raise AssertionError("GCM derivative at 0 disagrees with phi_hat route")
    s_req = s_grid[s_grid != 0] if len(s_grid) == 1 else s_grid
    z = np.interp(s_req, s_all, z_all)
    return LocalProcess(s_req, z, deriv0, direct)
