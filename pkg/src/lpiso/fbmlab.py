"""Fractional Brownian motion and the argmin{B_H(s) + s^2} reference law.

Fractional Gaussian noise is generated exactly in law by circulant embedding
(Davies-Harte), with a Cholesky factorisation as a small-size oracle and as
the fallback when the embedding spectrum is not nonnegative.

Two-sided paths use stationarity of increments: if B is an fBm on [0, 2M]
then s -> B(s + M) - B(M) is a two-sided fBm on [-M, M] with covariance
(|s|^{2H} + |t|^{2H} - |t - s|^{2H}) / 2 for every H.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import linalg

from .errors import BoundaryHitError, ConfigError, NumericalError

CHOLESKY_CAP = 1 << 12
SPECTRUM_TOL = 1e-10
DEFAULT_M = 5.0
DEFAULT_DELTA = 2.0 ** -10


def fbm_cov(H, s, t):
    """(s^{2H} + t^{2H} - |t - s|^{2H}) / 2."""
    if not 0 < H < 1:
        raise ConfigError("H must lie in (0, 1)")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    h2 = 2 * H
    return 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(t - s) ** h2)


def fgn_autocov(H, k):
    """Autocovariance of unit-step fractional Gaussian noise at lag k."""
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2 * H
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k ** h2 + np.abs(k - 1) ** h2)


@dataclass
class FbmPath:
    """fBm values on an equispaced grid including the origin (rows = paths)."""

    H: float
    grid: np.ndarray
    values: np.ndarray
    method: str


@lru_cache(maxsize=32)
def _circulant_spectrum(H, m):
    gam = fgn_autocov(H, np.arange(m + 1))
    row = np.concatenate((gam, gam[-2:0:-1]))
    lam = np.fft.rfft(row).real
    return lam


@lru_cache(maxsize=8)
def _cholesky_factor(H, m):
    idx = np.arange(m)
    cov = fgn_autocov(H, idx[:, None] - idx[None, :])
    return linalg.cholesky(cov, lower=True)


def sample_fgn(H, m, rng, reps=1, method="circulant"):
    """``reps`` rows of m unit-step fGn values; returns (array, method used)."""
    if not 0 < H < 1:
        raise ConfigError("H must lie in (0, 1)")
    if method == "circulant":
        lam = _circulant_spectrum(H, m)
        if lam.min() >= -SPECTRUM_TOL * lam.max():
            lam = np.clip(lam, 0.0, None)
            size = 2 * m
            # real Gaussian vector with covariance circ(row): irfft of
            # Hermitian white noise scaled by sqrt(lam * size)
            z = rng.standard_normal((reps, size // 2 + 1)) \
                + 1j * rng.standard_normal((reps, size // 2 + 1))
            z[:, 0] = math.sqrt(2) * z[:, 0].real
            z[:, -1] = math.sqrt(2) * z[:, -1].real
            w = z * np.sqrt(lam * size / 2.0)[None, :]
            return np.fft.irfft(w, n=size, axis=1)[:, :m], "circulant"
        method = "cholesky"
    if method != "cholesky":
        raise ConfigError(f"unknown method {method!r}")
    if m > CHOLESKY_CAP:
        raise ConfigError(f"cholesky capped at {CHOLESKY_CAP} points; use circulant")
    try:
        L = _cholesky_factor(H, m)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"fGn covariance not positive definite: {exc}") from None
    return rng.standard_normal((reps, m)) @ L.T, "cholesky"


def sample_fbm(H, n_points, T_max, rng, method="circulant", reps=1):
    """fBm on the grid k * T_max / n_points, k = 0..n_points."""
    if n_points < 1 or T_max <= 0:
        raise ConfigError("need n_points >= 1 and T_max > 0")
    if method == "circulant" and n_points & (n_points - 1):
        raise ConfigError("circulant needs a power-of-two n_points")
    inc, used = sample_fgn(H, n_points, rng, reps, method)
    step = T_max / n_points
    vals = np.concatenate((np.zeros((reps, 1)), np.cumsum(inc, axis=1)), axis=1)
    vals *= step ** H
    grid = step * np.arange(n_points + 1)
    return FbmPath(H, grid, vals, used)


def two_sided_fbm(H, M, delta, rng, reps=1, method="circulant"):
    """Two-sided fBm on s = -M..M; returns (s, values).

    When M is not a multiple of delta the step is shrunk to M / ceil(M / delta)
    so that both endpoints lie on the grid.
    """
    if M <= 0 or delta <= 0:
        raise ConfigError("need M > 0 and delta > 0")
    half = int(round(M / delta))
    if abs(half * delta - M) > 1e-9 * M:
        half = int(math.ceil(M / delta))
    half = max(half, 1)
    delta = M / half
    m = 2 * half
    points = 1 << (m - 1).bit_length() if method == "circulant" else m
    path = sample_fbm(H, points, points * delta, rng, method, reps)
    vals = path.values[:, :m + 1]
    vals = vals - vals[:, half:half + 1]
    s = delta * (np.arange(m + 1) - half)
    return s, vals


def argmin_on_grid(s, values):
    """Row-wise grid argmin of values + s^2, ties to smallest |s| then s < 0.

    Raises :class:`BoundaryHitError` when a minimiser sits at +-M.
    """
    obj = np.atleast_2d(values) + s[None, :] ** 2
    best = obj.min(axis=1, keepdims=True)
    hit = obj == best
    # preference order: |s| ascending, then negative side first
    order = np.lexsort((s, np.abs(s)))
    first = np.argmax(hit[:, order], axis=1)
    idx = order[first]
    edge = (idx == 0) | (idx == len(s) - 1)
    if np.any(edge):
        raise BoundaryHitError(f"argmin on the boundary |s| = {s[-1]} in "
                               f"{int(edge.sum())} draws; increase M",
                               hits=int(edge.sum()))
    return s[idx]


def sample_argmin(H, M=DEFAULT_M, delta=DEFAULT_DELTA, rng=None, reps=1,
                  noise_scale=1.0, method="circulant"):
    """Draws of argmin{B_H(s) + s^2 : s in [-M, M]} on the delta grid.

    ``noise_scale = 0`` removes the fBm (degenerate check, argmin 0).
    """
    if M <= 0 or delta <= 0:
        raise ConfigError("need M > 0 and delta > 0")
    if rng is None:
        raise ConfigError("sample_argmin needs an explicit rng stream")
    out = np.empty(reps)
    half = int(round(M / delta))
    batch = max(1, min(reps, (1 << 22) // (4 * half)))
    for start in range(0, reps, batch):
        size = min(batch, reps - start)
        s, vals = two_sided_fbm(H, M, delta, rng, size, method)
        out[start:start + size] = argmin_on_grid(s, noise_scale * vals)
    return out
