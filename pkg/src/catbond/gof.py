"""Goodness-of-fit statistics for truncated severity fits.

Conventions: KS ``D = max(D+, D-)`` and Kuiper ``V = D+ + D-`` are left
unscaled (no ``sqrt(n)`` factor); Anderson-Darling ``A^2`` and
Cramer-von Mises ``W^2`` take their usual quadratic forms.  All four are
computed from ``z_i = F_u(x_(i))``, the truncated cdf at the order
statistics, so they are invariant under increasing transformations.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .distributions import BoundaryFitWarning, TruncatedSeverity, fit_truncated_mle
from .errors import InvalidSample, NonConvergence
from .stochastic import as_seed_sequence, substream

STATISTICS = ("ks", "kuiper", "anderson_darling", "cramer_von_mises")
DEFAULT_REPS = 1000
MAX_FAILURE_FRACTION = 0.02

# log(z) is floored here so a point sitting exactly on the truncation bound
# gives a large but finite A^2
_LOG_FLOOR = -745.0


@dataclass(frozen=True)
class GofReport:
    ks: float
    kuiper: float
    anderson_darling: float
    cramer_von_mises: float
    p_values: tuple[float, float, float, float] | None = None
    bootstrap_reps: int = 0

    def __post_init__(self):
        if self.p_values is not None and not all(0.0 <= p <= 1.0 for p in self.p_values):
            raise ValueError("p-values must lie in [0, 1]")

    @property
    def statistics(self) -> tuple[float, float, float, float]:
        return (self.ks, self.kuiper, self.anderson_darling, self.cramer_von_mises)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["p_values"] = None if self.p_values is None else dict(zip(STATISTICS, self.p_values))
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "GofReport":
        p = doc.get("p_values")
        if isinstance(p, dict):
            p = tuple(float(p[k]) for k in STATISTICS)
        elif p is not None:
            p = tuple(float(v) for v in p)
        return cls(
            float(doc["ks"]),
            float(doc["kuiper"]),
            float(doc["anderson_darling"]),
            float(doc["cramer_von_mises"]),
            p,
            int(doc.get("bootstrap_reps", 0)),
        )


def _edf_statistics(log_cdf: np.ndarray, log_sf: np.ndarray) -> np.ndarray:
    """The four statistics from sorted ``log F`` and ``log(1 - F)`` values."""
    n = log_cdf.size
    z = np.exp(log_cdf)
    i = np.arange(1, n + 1)
    d_plus = float(np.max(i / n - z))
    d_minus = float(np.max(z - (i - 1) / n))
    d_plus, d_minus = max(d_plus, 0.0), max(d_minus, 0.0)
    lc = np.maximum(log_cdf, _LOG_FLOOR)
    ls = np.maximum(log_sf, _LOG_FLOOR)
    ad = -n - float(np.sum((2 * i - 1) * (lc + ls[::-1]))) / n
    cvm = 1.0 / (12 * n) + float(np.sum((z - (2 * i - 1) / (2 * n)) ** 2))
    return np.array([max(d_plus, d_minus), d_plus + d_minus, ad, cvm])


def _prepare(sample, dist) -> np.ndarray:
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise InvalidSample("goodness-of-fit needs a non-empty 1-D sample")
    if not np.all(np.isfinite(x)) or np.any(x < dist.truncation):
        raise InvalidSample("sample contains values below the truncation point")
    return np.sort(x, kind="stable")


def _statistics_array(x_sorted: np.ndarray, dist) -> np.ndarray:
    log_sf = np.asarray(dist.logsf(x_sorted), dtype=float)
    with np.errstate(divide="ignore"):
        log_cdf = np.log(-np.expm1(log_sf))
    return _edf_statistics(log_cdf, log_sf)


def gof_statistics(sample, dist: TruncatedSeverity) -> GofReport:
    """KS, Kuiper, Anderson-Darling and Cramer-von Mises against ``dist``.

    ``dist`` may be any truncated distribution exposing ``logsf`` and
    ``truncation``; ties are ordered stably.
    """
    stats = _statistics_array(_prepare(sample, dist), dist)
    return GofReport(*map(float, stats))


def bootstrap_pvalues(
    sample,
    family,
    truncation: float,
    reps: int = DEFAULT_REPS,
    seed=None,
    *,
    fitted=None,
    refit: bool = True,
    workers: int = 1,
) -> GofReport:
    """Parametric-bootstrap p-values for the fitted truncated ``family``.

    Each replicate draws ``len(sample)`` losses from the fitted truncated
    law on its own substream, refits the family (warm-started at the fitted
    parameters) and recomputes the statistics.  The p-value is
    ``(#{b >= observed} + 1) / (m + 1)`` over the ``m`` replicates that
    converged.

    Parameters
    ----------
    fitted : SeverityFamily, optional
        Reuse an existing fit of ``sample`` instead of fitting again.
    refit : bool
        Set to ``False`` only to demonstrate the bias of evaluating
        replicates against the original parameters.

    Raises
    ------
    NonConvergence
        If more than 2% of the replicate refits fail.
    """
    if reps < 100:
        raise ValueError("reps must be at least 100")
    x = np.asarray(sample, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryFitWarning)
        base = fitted if fitted is not None else fit_truncated_mle(x, family, truncation)
    dist = TruncatedSeverity(base, truncation)
    observed = _statistics_array(_prepare(x, dist), dist)
    n = x.size
    ss = as_seed_sequence(seed)

    def replicate(b: int):
        rng = substream(ss, b)
        y = np.sort(dist.sample(rng, n), kind="stable")
        if not refit:
            return _statistics_array(y, dist)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", BoundaryFitWarning)
                g = fit_truncated_mle(y, family, truncation, start=base)
        except NonConvergence:
            return None
        return _statistics_array(y, TruncatedSeverity(g, truncation))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(replicate, range(reps)))
    else:
        results = [replicate(b) for b in range(reps)]
    ok = [r for r in results if r is not None]
    failed = reps - len(ok)
    if failed > MAX_FAILURE_FRACTION * reps:
        raise NonConvergence(f"{failed} of {reps} bootstrap refits failed")
    boot = np.array(ok)
    exceed = np.sum(boot >= observed[None, :], axis=0)
    p = tuple(float(v) for v in (exceed + 1) / (len(ok) + 1))
    return GofReport(*map(float, observed), p_values=p, bootstrap_reps=len(ok))
