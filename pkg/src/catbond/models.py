"""Two-region aggregate loss models.

Every model is a sum of independent compound Poisson *components*, each
contributing a jump ``(J1, J2)`` to the two regions per event:

========================  ==============================  =====================
model                     components                      jump
========================  ==============================  =====================
``Independent``           region-1, region-2              ``(X, 0)``, ``(0, Y)``
``Proportional``          only-1, common, only-2          ``(p Z, (1 - p) Z)``
``Dependent``             only-1, common, only-2          copula pair ``(X, Y)``
========================  ==============================  =====================

so the joint cumulants of ``(S1(T), S2(T))`` are
``kappa_ij = T * sum_c rate_c * E[J1^i J2^j]``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Callable, ClassVar

import numpy as np
from scipy.special import ndtr

from .distributions import TruncatedSeverity
from .stochastic import copula_cross_moment, correlated_normals, substream

DEFAULT_CHUNK = 100_000


def _check_rate(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive intensity, got {value}")
    return value


class RegionLossModel:
    kind: ClassVar[str]
    _rate_fields: ClassVar[tuple[str, ...]]
    _severity_fields: ClassVar[tuple[str, ...]]

    def __post_init__(self):
        for name in self._rate_fields:
            object.__setattr__(self, name, _check_rate(name, getattr(self, name)))

    def rates(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in self._rate_fields)

    def severities(self) -> dict:
        return {f: getattr(self, f) for f in self._severity_fields}

    def map_severities(self, fn: Callable) -> "RegionLossModel":
        return replace(self, **{k: fn(v) for k, v in self.severities().items()})

    def scale_rates(self, factor: float) -> "RegionLossModel":
        return replace(self, **{f: getattr(self, f) * factor for f in self._rate_fields})

    # per-component behaviour, implemented by subclasses
    def draw_jumps(self, component: int, n: int, rng: np.random.Generator):
        """``n`` jumps of ``component`` as ``(j1, j2)``; ``None`` means zero."""
        raise NotImplementedError

    def jump_moment(self, component: int, i: int, j: int) -> float:
        raise NotImplementedError

    def simulate(self, horizon: float, size: int, rng: np.random.Generator):
        """``size`` independent draws of ``(S1(horizon), S2(horizon))``.

        Counts for all components are drawn first, then jumps component by
        component; the order of stream consumption does not depend on the
        severity types, which keeps distorted and undistorted runs on common
        random numbers.
        """
        counts = [rng.poisson(lam * horizon, size) for lam in self.rates()]
        s1 = np.zeros(size)
        s2 = np.zeros(size)
        for comp, cnt in enumerate(counts):
            total = int(cnt.sum())
            if total == 0:
                continue
            j1, j2 = self.draw_jumps(comp, total, rng)
            owner = np.repeat(np.arange(size), cnt)
            if j1 is not None:
                s1 += np.bincount(owner, weights=j1, minlength=size)
            if j2 is not None:
                s2 += np.bincount(owner, weights=j2, minlength=size)
        return s1, s2

    def to_dict(self) -> dict:
        doc = {"kind": self.kind}
        for f in fields(self):
            value = getattr(self, f.name)
            doc[f.name] = value.to_dict() if hasattr(value, "to_dict") else value
        return doc


@dataclass(frozen=True)
class Independent(RegionLossModel):
    lam1: float
    lam2: float
    sev1: TruncatedSeverity
    sev2: TruncatedSeverity

    kind: ClassVar[str] = "independent"
    _rate_fields: ClassVar[tuple[str, ...]] = ("lam1", "lam2")
    _severity_fields: ClassVar[tuple[str, ...]] = ("sev1", "sev2")

    def draw_jumps(self, component, n, rng):
        if component == 0:
            return self.sev1.sample(rng, n), None
        return None, self.sev2.sample(rng, n)

    def jump_moment(self, component, i, j):
        if component == 0:
            return self.sev1.raw_moment(i) if j == 0 else 0.0
        return self.sev2.raw_moment(j) if i == 0 else 0.0


@dataclass(frozen=True)
class Proportional(RegionLossModel):
    lam_only1: float
    lam_common: float
    lam_only2: float
    sev_only1: TruncatedSeverity
    sev_only2: TruncatedSeverity
    sev_common: TruncatedSeverity
    p: float

    kind: ClassVar[str] = "proportional"
    _rate_fields: ClassVar[tuple[str, ...]] = ("lam_only1", "lam_common", "lam_only2")
    _severity_fields: ClassVar[tuple[str, ...]] = ("sev_only1", "sev_only2", "sev_common")

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"split proportion must lie in (0, 1), got {self.p}")

    def draw_jumps(self, component, n, rng):
        if component == 0:
            return self.sev_only1.sample(rng, n), None
        if component == 2:
            return None, self.sev_only2.sample(rng, n)
        z = self.sev_common.sample(rng, n)
        return self.p * z, (1.0 - self.p) * z

    def jump_moment(self, component, i, j):
        if component == 0:
            return self.sev_only1.raw_moment(i) if j == 0 else 0.0
        if component == 2:
            return self.sev_only2.raw_moment(j) if i == 0 else 0.0
        return self.p**i * (1.0 - self.p) ** j * self.sev_common.raw_moment(i + j)


@dataclass(frozen=True)
class Dependent(RegionLossModel):
    lam_only1: float
    lam_common: float
    lam_only2: float
    sev_only1: TruncatedSeverity
    sev_only2: TruncatedSeverity
    sev_common1: TruncatedSeverity
    sev_common2: TruncatedSeverity
    spearman_rho: float

    kind: ClassVar[str] = "dependent"
    _rate_fields: ClassVar[tuple[str, ...]] = ("lam_only1", "lam_common", "lam_only2")
    _severity_fields: ClassVar[tuple[str, ...]] = ("sev_only1", "sev_only2", "sev_common1", "sev_common2")

    def __post_init__(self):
        super().__post_init__()
        if not -1.0 <= self.spearman_rho <= 1.0:
            raise ValueError(f"Spearman correlation must lie in [-1, 1], got {self.spearman_rho}")

    def draw_jumps(self, component, n, rng):
        if component == 0:
            return self.sev_only1.sample(rng, n), None
        if component == 2:
            return None, self.sev_only2.sample(rng, n)
        z1, z2 = correlated_normals(self.spearman_rho, rng, n)
        return self.sev_common1.isf(ndtr(-z1)), self.sev_common2.isf(ndtr(-z2))

    def jump_moment(self, component, i, j):
        if component == 0:
            return self.sev_only1.raw_moment(i) if j == 0 else 0.0
        if component == 2:
            return self.sev_only2.raw_moment(j) if i == 0 else 0.0
        if j == 0:
            return self.sev_common1.raw_moment(i)
        if i == 0:
            return self.sev_common2.raw_moment(j)
        # finite marginal moments are a precondition for the quadrature
        self.sev_common1.raw_moment(i)
        self.sev_common2.raw_moment(j)
        return copula_cross_moment(self.sev_common1, self.sev_common2, self.spearman_rho, i, j)


MODEL_KINDS: dict[str, type[RegionLossModel]] = {
    cls.kind: cls for cls in (Independent, Proportional, Dependent)
}


def model_from_dict(doc: dict) -> RegionLossModel:
    cls = MODEL_KINDS[doc["kind"]]
    kwargs = {}
    for f in fields(cls):
        value = doc[f.name]
        kwargs[f.name] = TruncatedSeverity.from_dict(value) if f.name in cls._severity_fields else float(value)
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BivariateMoments:
    mean1: float
    mean2: float
    var1: float
    var2: float
    cov: float

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.mean1, self.mean2])

    @property
    def cov_matrix(self) -> np.ndarray:
        return np.array([[self.var1, self.cov], [self.cov, self.var2]])

    @property
    def corr(self) -> float:
        return self.cov / math.sqrt(self.var1 * self.var2)

    def scaled(self, factor: float) -> "BivariateMoments":
        return BivariateMoments(*(factor * getattr(self, f.name) for f in fields(self)))


def _repair_psd(var1: float, var2: float, cov: float) -> tuple[float, float, float]:
    if cov * cov <= var1 * var2:
        return var1, var2, cov
    vals, vecs = np.linalg.eigh(np.array([[var1, cov], [cov, var2]]))
    vals = np.maximum(vals, 1e-12 * (var1 + var2))
    m = (vecs * vals) @ vecs.T
    return float(m[0, 0]), float(m[1, 1]), float(m[0, 1])


def joint_cumulant(model: RegionLossModel, horizon: float, i: int, j: int) -> float:
    """Joint cumulant ``kappa_ij`` of ``(S1(horizon), S2(horizon))``."""
    return horizon * sum(lam * model.jump_moment(c, i, j) for c, lam in enumerate(model.rates()))


def analytic_moments(model: RegionLossModel, horizon: float, cov_form: str = "compound") -> BivariateMoments:
    """Exact mean vector and covariance of ``(S1(horizon), S2(horizon))``.

    ``cov_form="squared_count"`` evaluates the common-event covariance of the
    dependent model as ``E[N^2] Cov(X, Y) + E[X] Var(N) E[Y]`` instead of the
    compound-Poisson value ``E[N] E[XY]``; it exists only for comparison.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    mean1 = joint_cumulant(model, horizon, 1, 0)
    mean2 = joint_cumulant(model, horizon, 0, 1)
    var1 = joint_cumulant(model, horizon, 2, 0)
    var2 = joint_cumulant(model, horizon, 0, 2)
    cov = joint_cumulant(model, horizon, 1, 1)
    if cov_form == "squared_count":
        if isinstance(model, Dependent):
            en = model.lam_common * horizon
            ex = model.sev_common1.raw_moment(1)
            ey = model.sev_common2.raw_moment(1)
            cxy = model.jump_moment(1, 1, 1) - ex * ey
            cov = (en + en * en) * cxy + ex * en * ey
    elif cov_form != "compound":
        raise ValueError(f"unknown cov_form {cov_form!r}")
    var1, var2, cov = _repair_psd(var1, var2, cov)
    return BivariateMoments(mean1, mean2, var1, var2, cov)


# ---------------------------------------------------------------------------
# Simulation entry points
# ---------------------------------------------------------------------------


def simulate_aggregate(model, horizon: float, rng: np.random.Generator, size=None):
    """One draw (``size=None``) or ``size`` draws of ``(S1, S2)`` at ``horizon``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if size is None:
        s1, s2 = model.simulate(horizon, 1, rng)
        return float(s1[0]), float(s2[0])
    return model.simulate(horizon, size, rng)


def chunk_sizes(n: int, chunk_size: int = DEFAULT_CHUNK) -> list[int]:
    full, rest = divmod(n, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def simulate_batch(model, horizon: float, n: int, seed, chunk_size: int = DEFAULT_CHUNK, workers: int = 1):
    """``n`` draws split into chunks, chunk ``i`` on ``substream(seed, i)``.

    Output depends only on ``(seed, n, chunk_size)``, not on ``workers``.
    """
    sizes = chunk_sizes(n, chunk_size)

    def run(item):
        idx, size = item
        return model.simulate(horizon, size, substream(seed, idx))

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, enumerate(sizes)))
    else:
        parts = [run(item) for item in enumerate(sizes)]
    s1 = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0)
    s2 = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0)
    return s1, s2


@dataclass(frozen=True)
class GaussianSurrogate:
    """Bivariate normal with given moments, usable wherever a model simulates.

    The moments already refer to a fixed horizon, so ``horizon`` is ignored.
    """

    moments: BivariateMoments

    def simulate(self, horizon, size, rng):
        z = rng.multivariate_normal(self.moments.mean, self.moments.cov_matrix, size=size, method="cholesky")
        return z[:, 0], z[:, 1]
