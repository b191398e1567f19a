"""Small statistical helpers shared by the attack and experiment modules."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import binom

Z95 = 1.959963984540054


def normal_cdf(x: float) -> float:
    """Standard normal CDF through the complementary error function.

    ``math.erfc`` is accurate to a few ulps, which keeps tails such as
    ``normal_cdf(-8)`` relatively accurate as well.
    """
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


def median_ci(values, level: float = 0.95) -> tuple[float, float, float]:
    """Median with a distribution-free order-statistic confidence interval."""
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    med = float(np.median(v))
    if n == 1:
        return med, med, med
    # 1-based order statistics k and n - k + 1
    k = max(int(binom.ppf((1.0 - level) / 2, n, 0.5)), 1)
    return med, float(v[k - 1]), float(v[n - k])


def mean_ci(values) -> tuple[float, float, float]:
    v = np.asarray(values, dtype=float)
    m = float(np.mean(v))
    if len(v) < 2:
        return m, m, m
    half = Z95 * float(np.std(v, ddof=1)) / math.sqrt(len(v))
    return m, m - half, m + half
