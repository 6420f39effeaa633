"""Small statistical helpers shared by the Monte Carlo estimators."""
import math

import numpy as np
from scipy import stats


def proportion(k, n):
    """Estimate and standard error of a binomial proportion."""
    if n <= 0:
        return float("nan"), float("nan")
    p = k / n
    return p, math.sqrt(max(p * (1 - p), 0.0) / n)


def wilson(k, n, z=1.96):
    """Wilson score interval for k successes out of n."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def two_proportion_z(k1, n1, k2, n2):
    """Unpooled two-sample z statistic (0 when both samples are degenerate and equal)."""
    p1, p2 = k1 / n1, k2 / n2
    se = math.sqrt(p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2)
    if se == 0:
        if p1 == p2:
            return 0.0
        # degenerate samples that disagree: fall back on the pooled variance
        p = (k1 + k2) / (n1 + n2)
        se = math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
        return (p1 - p2) / se if se > 0 else math.inf
    return (p1 - p2) / se


def mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()) if x.size else float("nan"), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def chi2_uniform_pvalue(counts):
    counts = np.asarray(counts, dtype=float)
    return float(stats.chisquare(counts).pvalue)
