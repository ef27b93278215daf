"""Independent reference computations shared by the test modules."""

import math

import numpy as np


def phi(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def phi_inv(p, lo=-40.0, hi=40.0):
    """Normal quantile by bisection on ``math.erfc``; independent of scipy."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def moment_errors(s1, s2, m):
    """Standardised differences between sample moments of ``(s1, s2)`` and ``m``.

    Standard errors use the empirical fourth moments, which is what makes
    the comparison honest for heavy-tailed severities.
    """
    n = s1.size
    d1, d2 = s1 - s1.mean(), s2 - s2.mean()
    out = {
        "mean1": (s1.mean() - m.mean1) / math.sqrt(d1.var() / n),
        "mean2": (s2.mean() - m.mean2) / math.sqrt(d2.var() / n),
        "var1": (np.mean(d1**2) - m.var1) / math.sqrt(np.var(d1**2) / n),
        "var2": (np.mean(d2**2) - m.var2) / math.sqrt(np.var(d2**2) / n),
    }
    prod = d1 * d2
    if np.var(prod) > 0:
        out["cov"] = (np.mean(prod) - m.cov) / math.sqrt(np.var(prod) / n)
    else:
        out["cov"] = 0.0 if m.cov == 0 else math.inf
    return out
