"""Kolmogorov-Smirnov verdicts, meta-run calibration and small regressions."""
from dataclasses import dataclass
import math

import numpy as np
from scipy import stats

from ..errors import ConfigError

KS_LEVEL = 0.01
KS_MIN_SAMPLE = 2000
META_RUNS = 20
META_PASS_FRACTION = 0.9


def ks_critical(level=KS_LEVEL):
    """Asymptotic c(level) = sqrt(-log(level / 2) / 2) of the Kolmogorov law."""
    if not 0 < level < 1:
        raise ConfigError("level must lie in (0, 1)")
    return math.sqrt(-0.5 * math.log(level / 2.0))


@dataclass
class KSResult:
    statistic: float
    critical: float
    sizes: tuple

    @property
    def passed(self):
        return self.statistic <= self.critical


def _check_size(size, min_size):
    if size < min_size:
        raise ConfigError(f"KS verdicts need at least {min_size} samples, got {size}")


def ks_one_sample(sample, cdf, level=KS_LEVEL, min_size=KS_MIN_SAMPLE):
    """One-sample KS against a continuous ``cdf`` with the asymptotic
    critical value c(level) / sqrt(n)."""
    x = np.asarray(sample, dtype=float).ravel()
    _check_size(x.size, min_size)
    stat = float(stats.ks_1samp(x, cdf).statistic)
    return KSResult(stat, ks_critical(level) / math.sqrt(x.size), (x.size,))


def ks_two_sample(a, b, level=KS_LEVEL, min_size=KS_MIN_SAMPLE):
    """Two-sample KS with the asymptotic critical value
    c(level) sqrt((n + m) / (n m))."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    _check_size(min(a.size, b.size), min_size)
    stat = float(stats.ks_2samp(a, b).statistic)
    crit = ks_critical(level) * math.sqrt((a.size + b.size) / (a.size * b.size))
    return KSResult(stat, crit, (a.size, b.size))


def normal_cdf(scale):
    """cdf of N(0, scale^2)."""
    return lambda x: stats.norm.cdf(x, scale=scale)


@dataclass
class MetaVerdict:
    results: list

    @property
    def passes(self):
        return sum(r.passed for r in self.results)

    @property
    def runs(self):
        return len(self.results)

    @property
    def passed(self):
        return self.passes >= math.ceil(META_PASS_FRACTION * self.runs - 1e-9)


def meta_verdict(results):
    """Pass when at least 90% of the independent meta-runs pass."""
    return MetaVerdict(list(results))


def ols_slope(x, y):
    """(slope, standard error) of the least-squares line y = a + b x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise ConfigError("ols_slope needs at least 3 points")
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


def sd_with_se(sample):
    """Sample standard deviation and its normal-theory standard error."""
    x = np.asarray(sample, dtype=float).ravel()
    sd = float(np.std(x, ddof=1))
    return sd, sd / math.sqrt(2.0 * (x.size - 1))
