"""Zero-coupon CAT bond valuation.

The bond pays 1 at maturity if both regional aggregate losses stay below
their thresholds and the recovery ``c`` otherwise, so its price is
``exp(-rT) * (c + (1 - c) * P(S1 < D1, S2 < D2))``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr

from .distributions import WangDistortion, apply_wang
from .errors import DegenerateVariance
from .models import DEFAULT_CHUNK, BivariateMoments, analytic_moments, simulate_batch

DEFAULTS = {"maturity": 2.0, "rate": 0.03, "recovery": 0.0, "n_sims": 20_000}

CSV_COLUMNS = ("D1", "D2", "price", "std_error", "trigger_prob")


@dataclass(frozen=True)
class BondSpec:
    maturity: float
    rate: float
    recovery: float
    threshold1: float
    threshold2: float

    def __post_init__(self):
        if not self.maturity > 0:
            raise ValueError("maturity must be positive")
        if not 0.0 <= self.recovery <= 1.0:
            raise ValueError("recovery must lie in [0, 1]")
        if not (self.threshold1 > 0 and self.threshold2 > 0):
            raise ValueError("thresholds must be positive")

    @property
    def discount(self) -> float:
        return math.exp(-self.rate * self.maturity)

    def with_thresholds(self, d1: float, d2: float) -> "BondSpec":
        return BondSpec(self.maturity, self.rate, self.recovery, d1, d2)

    def price_from_survival(self, q):
        return self.discount * (self.recovery + (1.0 - self.recovery) * q)


@dataclass(frozen=True)
class PriceEstimate:
    price: float
    std_error: float
    n_sims: int
    trigger_probability: float


def _mc_estimate(bond: BondSpec, survived: int, n: int) -> PriceEstimate:
    q = survived / n
    se = bond.discount * (1.0 - bond.recovery) * math.sqrt(q * (1.0 - q) / n)
    return PriceEstimate(float(bond.price_from_survival(q)), float(se), n, 1.0 - q)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def mc_price(
    model,
    bond: BondSpec,
    n_sims: int,
    seed,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> PriceEstimate:
    """Monte Carlo price under the physical measure.

    ``model`` is anything with ``simulate(horizon, size, rng)``; a
    ``GaussianSurrogate`` plugs in here to isolate the normal kernel.
    """
    if n_sims < 100:
        raise ValueError("n_sims must be at least 100")
    s1, s2 = simulate_batch(model, bond.maturity, n_sims, seed, chunk_size, workers)
    survived = int(np.count_nonzero((s1 < bond.threshold1) & (s2 < bond.threshold2)))
    return _mc_estimate(bond, survived, n_sims)


# ---------------------------------------------------------------------------
# Bivariate normal
# ---------------------------------------------------------------------------

_GL_X, _GL_W = leggauss(20)
_TWO_PI = 2.0 * math.pi


def _bvn_upper(h: float, k: float, r: float) -> float:
    """``P(Z1 > h, Z2 > k)`` for correlation ``|r| < 1``.

    Drezner-Wesolowsky integral in ``asin(r)`` for moderate correlation;
    above 0.925 the integrand is rewritten around the singular point with
    the Taylor correction from Genz, each with a 20-point Gauss-Legendre rule.
    """
    hk = h * k
    if abs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = math.asin(r)
        sn = np.sin(0.5 * asr * (_GL_X + 1.0))
        val = np.dot(_GL_W, np.exp((sn * hk - hs) / (1.0 - sn * sn)))
        return float(val * asr / (2.0 * _TWO_PI) + ndtr(-h) * ndtr(-k))

    if r < 0:
        k = -k
        hk = -hk
    bvn = 0.0
    if abs(r) < 1.0:
        a2 = (1.0 - r) * (1.0 + r)
        a = math.sqrt(a2)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        asr = -0.5 * (bs / a2 + hk)
        if asr > -100.0:
            bvn = a * math.exp(asr) * (1.0 - c * (bs - a2) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a2 * a2 / 5.0)
        if hk > -100.0:
            b = math.sqrt(bs)
            sp = math.sqrt(_TWO_PI) * ndtr(-b / a)
            bvn -= math.exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
        a *= 0.5
        xs = (a * (_GL_X + 1.0)) ** 2
        rs = np.sqrt(1.0 - xs)
        asr_v = -0.5 * (bs / xs + hk)
        ok = asr_v > -100.0
        sp_v = 1.0 + c * xs * (1.0 + d * xs)
        ep_v = np.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
        terms = np.where(ok, np.exp(np.where(ok, asr_v, 0.0)) * (ep_v - sp_v), 0.0)
        bvn += a * float(np.dot(_GL_W, terms))
        bvn = -bvn / _TWO_PI
    if r > 0:
        bvn += ndtr(-max(h, k))
    elif h >= k:
        bvn = -bvn
    else:
        if h < 0:
            lower = ndtr(k) - ndtr(h)
        else:
            lower = ndtr(-h) - ndtr(-k)
        bvn = lower - bvn
    return float(bvn)


def bvn_cdf(h: float, k: float, corr: float) -> float:
    """``P(Z1 <= h, Z2 <= k)`` for a standard bivariate normal, abs. error < 1e-7."""
    if not -1.0 <= corr <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {corr}")
    if math.isinf(h) or math.isinf(k):
        if h == -math.inf or k == -math.inf:
            return 0.0
        return float(ndtr(min(h, k)))
    if corr == 1.0:
        return float(ndtr(min(h, k)))
    if corr == -1.0:
        return float(max(ndtr(h) + ndtr(k) - 1.0, 0.0))
    return min(max(_bvn_upper(-h, -k, corr), 0.0), 1.0)


def normal_approx_price(moments: BivariateMoments, bond: BondSpec) -> PriceEstimate:
    if not (moments.var1 > 0 and moments.var2 > 0):
        raise DegenerateVariance("normal approximation needs positive variances")
    h = (bond.threshold1 - moments.mean1) / math.sqrt(moments.var1)
    k = (bond.threshold2 - moments.mean2) / math.sqrt(moments.var2)
    corr = float(np.clip(moments.corr, -1.0, 1.0))
    q = bvn_cdf(h, k, corr)
    return PriceEstimate(float(bond.price_from_survival(q)), 0.0, 0, 1.0 - q)


# ---------------------------------------------------------------------------
# Surfaces and Wang curves
# ---------------------------------------------------------------------------


@dataclass
class PriceSurface:
    grid1: np.ndarray
    grid2: np.ndarray
    price: np.ndarray
    std_error: np.ndarray
    trigger_probability: np.ndarray
    n_sims: int = 0
    meta: dict = field(default_factory=dict)

    def cell(self, i: int, j: int) -> PriceEstimate:
        return PriceEstimate(
            float(self.price[i, j]), float(self.std_error[i, j]), self.n_sims, float(self.trigger_probability[i, j])
        )

    def rows(self):
        for i, d1 in enumerate(self.grid1):
            for j, d2 in enumerate(self.grid2):
                yield (float(d1), float(d2), float(self.price[i, j]), float(self.std_error[i, j]),
                       float(self.trigger_probability[i, j]))

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows():
            writer.writerow([repr(v) for v in row])
        return buf.getvalue()


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("threshold grid must be a non-empty 1-D sequence")
    if np.any(np.diff(g) <= 0):
        raise ValueError("threshold grid must be strictly ascending")
    return g


def survival_counts(s1: np.ndarray, s2: np.ndarray, grid1, grid2) -> np.ndarray:
    """``#{s1 < D1, s2 < D2}`` for every grid cell, from one shared path set."""
    counts = np.empty((len(grid1), len(grid2)), dtype=np.int64)
    for i, d1 in enumerate(grid1):
        below = np.sort(s2[s1 < d1])
        counts[i] = np.searchsorted(below, grid2, side="left")
    return counts


def price_surface(
    model,
    bond: BondSpec,
    grid1,
    grid2,
    method: str = "mc",
    *,
    n_sims: int = DEFAULTS["n_sims"],
    seed=None,
    moments: BivariateMoments | None = None,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> PriceSurface:
    """Prices over ``grid1 x grid2``; ``bond`` supplies maturity, rate and recovery.

    The ``mc`` method evaluates every cell on one shared set of paths, so the
    surface is exactly monotone in both thresholds.
    """
    g1, g2 = _check_grid(grid1), _check_grid(grid2)
    shape = (g1.size, g2.size)
    if method == "mc":
        if n_sims < 100:
            raise ValueError("n_sims must be at least 100")
        s1, s2 = simulate_batch(model, bond.maturity, n_sims, seed, chunk_size, workers)
        q = survival_counts(s1, s2, g1, g2) / n_sims
        price = bond.price_from_survival(q)
        se = bond.discount * (1.0 - bond.recovery) * np.sqrt(q * (1.0 - q) / n_sims)
        return PriceSurface(g1, g2, price, se, 1.0 - q, n_sims)
    if method == "normal":
        mom = moments if moments is not None else analytic_moments(model, bond.maturity)
        price = np.empty(shape)
        trig = np.empty(shape)
        for i, d1 in enumerate(g1):
            for j, d2 in enumerate(g2):
                est = normal_approx_price(mom, bond.with_thresholds(d1, d2))
                price[i, j] = est.price
                trig[i, j] = est.trigger_probability
        return PriceSurface(g1, g2, price, np.zeros(shape), trig, 0)
    raise ValueError(f"unknown pricing method {method!r}")


def relative_error(approx: PriceSurface, reference: PriceSurface) -> np.ndarray:
    """``(approx - reference) / reference`` cellwise."""
    return (approx.price - reference.price) / reference.price


def distort_model(model, lam: float):
    if lam == 0:
        return model
    distortion = WangDistortion(lam)
    return model.map_severities(lambda sev: apply_wang(sev, distortion))


def wang_price_curve(
    model,
    bond: BondSpec,
    lambdas,
    n_sims: int,
    seed,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> list[tuple[float, PriceEstimate]]:
    """MC prices with every severity Wang-distorted, one seed for all ``lambdas``.

    Counting intensities are left untouched.
    """
    out = []
    for lam in lambdas:
        lam = float(lam)
        if lam > 0:
            raise ValueError("loss distortions use lambda <= 0")
        est = mc_price(distort_model(model, lam), bond, n_sims, seed, chunk_size=chunk_size, workers=workers)
        out.append((lam, est))
    return out
