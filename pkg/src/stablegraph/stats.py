"""Small statistical helpers used by the experiments."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as _st


def mean_se(x):
    """Sample mean and its standard error."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float(x.mean()) if len(x) else math.nan, math.inf
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def ratio_se(num, den):
    """sum(num) / sum(den) with a delta-method standard error over replicas."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    r = num.sum() / den.sum()
    k = len(num)
    if k < 2:
        return float(r), math.inf
    resid = num - r * den
    se = math.sqrt(k / (k - 1) * np.sum(resid ** 2)) / den.sum()
    return float(r), float(se)


def median_se(x):
    """Median with the normal-approximation standard error 1.2533 sd / sqrt(n)."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float(np.median(x)), math.inf
    return float(np.median(x)), float(1.2533 * x.std(ddof=1) / math.sqrt(len(x)))


def ks_statistic(a, b):
    """Two-sample Kolmogorov-Smirnov distance."""
    return float(_st.ks_2samp(a, b).statistic)


def dispersion_index(counts):
    """Variance over mean of counts (1 for Poisson)."""
    c = np.asarray(counts, dtype=float)
    m = c.mean()
    if m == 0:
        return math.nan
    return float(c.var(ddof=1) / m)


def hill_estimator(x, k):
    """Hill estimate of the tail index from the k largest observations."""
    x = np.sort(np.asarray(x, dtype=float))[::-1]
    if not 1 <= k < len(x):
        raise ValueError("need 1 <= k < len(x)")
    if x[k] <= 0:
        raise ValueError("Hill estimator needs positive order statistics")
    return float(1.0 / np.mean(np.log(x[:k] / x[k])))


def loglog_slope(n, y):
    """Least-squares slope of log y against log n, with its standard error."""
    res = _st.linregress(np.log(np.asarray(n, dtype=float)), np.log(np.asarray(y, dtype=float)))
    # two points fit exactly and carry no residual information
    return float(res.slope), float(res.stderr) if len(n) > 2 else math.nan
