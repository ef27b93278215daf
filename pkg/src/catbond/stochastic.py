"""Counting processes, random streams and the Spearman-targeted Gaussian copula."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import special

from .errors import ZeroWindow


class DegenerateIntensityWarning(UserWarning):
    """An estimated intensity of zero: the class never fires."""


@dataclass(frozen=True)
class PoissonIntensity:
    """Events per year of a homogeneous Poisson process."""

    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise ValueError(f"intensity must be finite and non-negative, got {self.rate}")

    def __float__(self):
        return float(self.rate)

    @property
    def degenerate(self) -> bool:
        return self.rate == 0


@dataclass(frozen=True)
class DependenceSpec:
    spearman_rho: float

    def __post_init__(self):
        if not -1.0 <= self.spearman_rho <= 1.0:
            raise ValueError(f"Spearman correlation must lie in [-1, 1], got {self.spearman_rho}")

    @property
    def pearson(self) -> float:
        return spearman_to_pearson(self.spearman_rho)


def spearman_to_pearson(rho_s: float) -> float:
    """Gaussian-copula correlation with rank correlation ``rho_s``."""
    if abs(rho_s) == 1.0:
        return float(rho_s)  # 2 sin(pi / 6) rounds below one
    return float(np.clip(2.0 * math.sin(math.pi * rho_s / 6.0), -1.0, 1.0))


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def substream(seed, index: int) -> np.random.Generator:
    """Independent generator for work item ``index`` derived from ``seed``.

    The mapping is a pure function of ``(seed, index)`` so chunks can be
    evaluated in any order or on any worker.
    """
    ss = as_seed_sequence(seed)
    child = np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (index,))
    return np.random.default_rng(child)


# ---------------------------------------------------------------------------
# Poisson counts
# ---------------------------------------------------------------------------


def sample_poisson_count(intensity, horizon: float, rng: np.random.Generator, size=None):
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    # numpy switches from inversion to PTRS rejection at mean 10
    return rng.poisson(float(intensity) * horizon, size)


def estimate_intensity(event_count: int, window_years: float) -> PoissonIntensity:
    if not window_years > 0:
        raise ZeroWindow(f"window_years must be positive, got {window_years}")
    if event_count < 0:
        raise ValueError("event_count must be non-negative")
    if event_count == 0:
        warnings.warn("no events observed; intensity estimate is 0", DegenerateIntensityWarning, stacklevel=2)
    return PoissonIntensity(event_count / window_years)


# ---------------------------------------------------------------------------
# Gaussian copula
# ---------------------------------------------------------------------------


def correlated_normals(rho_s: float, rng: np.random.Generator, size=None):
    r = spearman_to_pearson(rho_s)
    z1 = rng.standard_normal(size)
    e = rng.standard_normal(size)
    z2 = r * z1 + math.sqrt(max(1.0 - r * r, 0.0)) * e
    return z1, z2


def sample_correlated_pair(dist_x, dist_y, dep, rng: np.random.Generator, size=None):
    """Draw ``(X, Y)`` with the given marginals and Spearman correlation.

    Normal scores ``z`` with Pearson ``2 sin(pi rho_s / 6)`` are mapped to
    survival levels ``Phi(-z)`` and then through each marginal's ``isf``,
    which is the same as ``F^-1(Phi(z))`` but keeps upper-tail precision.
    """
    rho_s = dep.spearman_rho if isinstance(dep, DependenceSpec) else float(dep)
    z1, z2 = correlated_normals(rho_s, rng, size)
    return dist_x.isf(special.ndtr(-z1)), dist_y.isf(special.ndtr(-z2))


def copula_cross_moment(dist_x, dist_y, rho_s: float, i: int = 1, j: int = 1, order: int = 160) -> float:
    """``E[X^i Y^j]`` under the Gaussian copula, by tensor Gauss-Hermite.

    The integrand is written on the normal-score scale where both quantile
    maps are smooth.
    """
    r = spearman_to_pearson(rho_s)
    nodes, weights = hermegauss(order)
    weights = weights / math.sqrt(2.0 * math.pi)
    # survival levels underflow past |z| ~ 37
    keep = (weights > 1e-300) & (np.abs(nodes) < 30.0)
    nodes, weights = nodes[keep], weights[keep]
    fx = dist_x.isf(special.ndtr(-nodes)) ** i
    if j == 0:
        return float(np.dot(weights, fx))
    c = math.sqrt(max(1.0 - r * r, 0.0))
    if c == 0.0:
        fy = dist_y.isf(special.ndtr(-(r * nodes))) ** j
        return float(np.dot(weights, fx * fy))
    z2 = r * nodes[:, None] + c * nodes[None, :]
    fy = np.asarray(dist_y.isf(special.ndtr(-z2.ravel())), dtype=float).reshape(z2.shape) ** j
    return float(weights @ (fx[:, None] * fy) @ weights)
