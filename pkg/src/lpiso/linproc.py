"""Simulation of linear processes X_k = sum_i a_i xi_{k-i} and their sums.

Partial sums S_k = sum_j c_{k,j} xi_j are produced for all k <= n in one
pass: the innovations are drawn once on the explicit window of
:func:`lpiso.coeffs.window_layout`, convolved with the coefficients and
cumulated.  Innovations beyond the window (long-memory and two-sided
coefficient tails) enter through a Gaussian far field whose covariance is
eta times the quadrature Gram matrix from :func:`lpiso.coeffs.far_gram`,
sampled on Chebyshev-Lobatto nodes in k and interpolated to every k.

The coupled martingale sums T_k = sum_j c_{k,j} d_j use the same innovation
draws; the far field is shared by S and T.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import signal

from . import coeffs as cf
from . import innovations as inv
from .errors import ConfigError
from .rng import stream

CHUNK_CELLS = 1 << 21
FAR_NODES = 17
DIRECT_SUPPORT = 64


@dataclass
class SamplePath:
    """Partial sums of one or more replications (rows).

    ``S`` and ``T`` have shape (reps, n) holding S_1..S_n.  ``far`` is the
    far-field part already included in S and T.  ``normalizer`` is a
    (name, value) pair that callers apply themselves.
    """

    n: int
    grid: np.ndarray
    S: np.ndarray
    T: np.ndarray = None
    far: np.ndarray = None
    xi_window: tuple = None
    normalizer: tuple = ("v_n", math.nan)

    def at_grid(self, which="S"):
        """Values at k = floor(n t) for t in grid (0 where floor(n t) = 0)."""
        arr = self.S if which == "S" else self.T
        k = np.floor(self.n * np.asarray(self.grid) + 1e-9).astype(int)
        out = np.zeros((arr.shape[0], len(k)))
        pos = k > 0
        out[:, pos] = arr[:, k[pos] - 1]
        return out

    @property
    def X(self):
        """Increments X_1..X_n."""
        return np.diff(self.S, axis=1, prepend=0.0)


def normalizer_value(coeff, n, kind):
    if kind == "v_n":
        return math.sqrt(cf.v2(coeff, n))
    if kind == "s_n":
        return math.sqrt(cf.s_squared(coeff, n))
    if kind == "sqrt_n":
        return math.sqrt(n)
    raise ConfigError(f"unknown normalizer {kind!r}")


def lobatto_nodes(n, count=FAR_NODES):
    """Chebyshev-Lobatto nodes on [0, n]."""
    i = np.arange(count)
    return 0.5 * n * (1.0 - np.cos(np.pi * i / (count - 1)))


def barycentric_matrix(nodes, x):
    """Matrix B with B @ f(nodes) = interpolant at x (Chebyshev-Lobatto)."""
    count = len(nodes)
    w = (-1.0) ** np.arange(count)
    w[0] *= 0.5
    w[-1] *= 0.5
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    terms = w[None, :] / diff
    B = terms / terms.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    B[rows] = exact[rows].astype(float)
    return B


@dataclass(frozen=True)
class _FarSide:
    root: np.ndarray      # (features, features): W = z @ root.T
    interp: np.ndarray    # (n, nodes)
    n_const: int
    sign: np.ndarray      # (n,) factor on the node part; constants enter with +1


@dataclass(frozen=True)
class _Plan:
    n: int
    j_lo: int
    j_hi: int
    i_lo: int
    a: np.ndarray
    sides: tuple


@lru_cache(maxsize=64)
def _plan(coeff, n, past_factor):
    j_lo, j_hi, mp, mf = cf.window_layout(coeff, n, past_factor)
    i_lo, i_hi = 1 - j_hi, n - j_lo
    lo, hi = coeff.bounds
    if math.isfinite(lo):
        i_lo_eff = max(i_lo, int(lo))
    else:
        i_lo_eff = i_lo
    if math.isfinite(hi):
        i_hi_eff = min(i_hi, int(hi))
    else:
        i_hi_eff = i_hi
    a = coeff.values(i_lo_eff, i_hi_eff)
    sides = []
    nodes = lobatto_nodes(n)
    k = np.arange(1, n + 1, dtype=float)
    for side, off in (("past", mp), ("future", mf)):
        if off is None:
            continue
        fg = cf.far_gram(coeff, side, nodes, off, n)
        lam, vec = np.linalg.eigh(fg.gram)
        root = vec * np.sqrt(np.clip(lam, 0.0, None))[None, :]
        if fg.n_const:
            sign = -((-1.0) ** (np.arange(1, n + 1) % 2))
        else:
            sign = np.ones(n)
        sides.append(_FarSide(root, barycentric_matrix(nodes, k), fg.n_const, sign))
    return _Plan(n, j_lo, j_hi, i_lo_eff, a, tuple(sides))


def _filter(plan, w):
    """Explicit-window sums sum_i a_i w_{t-i} for t = 1..n, rows of w on
    [j_lo, j_hi]."""
    n, a = plan.n, plan.a
    if len(a) <= DIRECT_SUPPORT:
        out = np.zeros((w.shape[0], n))
        for r, coef in enumerate(a):
            if coef == 0.0:
                continue
            i = plan.i_lo + r
            start = 1 - i - plan.j_lo
            out += coef * w[:, start:start + n]
        return out
    full = signal.fftconvolve(w, a[None, :], mode="full", axes=1)
    start = 1 - plan.i_lo - plan.j_lo
    return full[:, start:start + n]


def _far_field(plan, rng, reps, scale):
    total = np.zeros((reps, plan.n))
    for side in plan.sides:
        z = rng.standard_normal((reps, side.root.shape[0]))
        W = scale * (z @ side.root.T)
        nodes_part = W[:, side.n_const:] @ side.interp.T
        field = nodes_part * side.sign[None, :]
        if side.n_const:
            field += W[:, :1]
        total += field
    return total


def _simulate_chunk(coeff, innov, n, past_factor, with_martingale, seed, purpose,
                    chunk, rows, keep_window=False):
    plan = _plan(coeff, n, past_factor)
    rng = stream(seed, purpose, chunk)
    path = inv.sample_path(innov, plan.j_lo, plan.j_hi, rng, rows)
    far = _far_field(plan, rng, rows, math.sqrt(inv.eta(innov))) if plan.sides else None
    S = np.cumsum(_filter(plan, path.xi), axis=1)
    T = None
    if with_martingale:
        T = S if path.d is path.xi else np.cumsum(_filter(plan, path.d), axis=1)
    if far is not None:
        S = S + far
        if T is not None:
            T = T + far
    window = (plan.j_lo, path.xi, path.d) if keep_window else None
    return S, T, far, window


def chunk_rows(coeff, n, past_factor=cf.PAST_FACTOR):
    """Replications per chunk; a function of the problem only, never of the
    worker count, so results are reproducible across thread counts."""
    j_lo, j_hi, _, _ = cf.window_layout(coeff, n, past_factor)
    width = 2 * (j_hi - j_lo + 1) + n
    return max(1, min(256, CHUNK_CELLS // width))


def chunk_sizes(coeff, n, reps, past_factor=cf.PAST_FACTOR):
    rows = chunk_rows(coeff, n, past_factor)
    return [min(rows, reps - s) for s in range(0, reps, rows)]


def map_chunks(fn, coeff, innov, n, reps, seed, with_martingale=False,
               purpose="linproc", workers=1, past_factor=cf.PAST_FACTOR,
               keep_window=False):
    """Apply ``fn(S, T, far, window)`` to every chunk of replications and
    return the results in chunk order.

    Chunk c draws from the stream (seed, purpose, c), so the output does not
    depend on ``workers``.  Use this instead of :func:`simulate_paths` when
    the full (reps, n) array would not fit in memory.
    """
    if n < 1 or reps < 1:
        raise ConfigError("simulate: need n >= 1 and reps >= 1")
    sizes = chunk_sizes(coeff, n, reps, past_factor)

    def run(c):
        return fn(*_simulate_chunk(coeff, innov, n, past_factor, with_martingale, seed,
                                   purpose, c, sizes[c], keep_window))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run, range(len(sizes))))
    return [run(c) for c in range(len(sizes))]


def simulate_paths(coeff, innov, n, reps, seed, grid=None, with_martingale=False,
                   normalizer="v_n", purpose="linproc", workers=1,
                   past_factor=cf.PAST_FACTOR, keep_window=False):
    """Simulate ``reps`` independent replications of S_1..S_n (and T).

    Replications are split into fixed-size chunks, chunk c drawing from the
    stream (seed, purpose, c).
    """
    grid = np.linspace(0, 1, 11)[1:] if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(grid > 1) or np.any(np.diff(grid) < 0):
        raise ConfigError("grid must be sorted inside (0, 1]")
    parts = map_chunks(lambda *p: p, coeff, innov, n, reps, seed, with_martingale,
                       purpose, workers, past_factor, keep_window)
    S = np.concatenate([p[0] for p in parts])
    T = np.concatenate([p[1] for p in parts]) if with_martingale else None
    far = np.concatenate([p[2] for p in parts]) if parts[0][2] is not None else None
    window = parts[0][3] if keep_window and len(parts) == 1 else None
    norm = (normalizer, normalizer_value(coeff, n, normalizer))
    return SamplePath(n, grid, S, T, far, window, norm)


def simulate_path(coeff, innov, n, grid, seed, with_martingale=False,
                  normalizer="v_n", purpose="linproc"):
    """Single replication, keeping the innovation window for inspection."""
    return simulate_paths(coeff, innov, n, 1, seed, grid, with_martingale,
                          normalizer, purpose, keep_window=True)


def linear_statistic(coeff, path, k):
    """S_k recomputed as sum_j c_{k,j} xi_j over the stored window plus the
    stored far field (single-row paths)."""
    j_lo, xi, _ = path.xi_window
    j_hi = j_lo + xi.shape[1] - 1
    c = cf.explicit_window(coeff, k, j_lo, j_hi)
    val = float(c @ xi[0])
    if path.far is not None:
        val += float(path.far[0, k - 1])
    return val


def max_statistics(S, T=None):
    """(max_k |S_k|, max_k S_k^2, max_k |S_k - T_k|) per row."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    m = np.max(np.abs(S), axis=1)
    diff = None
    if T is not None:
        diff = np.max(np.abs(S - np.atleast_2d(T)), axis=1)
    return m, m ** 2, diff
