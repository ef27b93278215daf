"""Left-truncated loss severities, their moments, MLE fitting and Wang distortion.

All monetary amounts are in billions of USD.  The default reporting threshold
of 25 million USD is therefore ``DEFAULT_TRUNCATION = 0.025``.

Every severity object (``TruncatedSeverity`` and ``WangDistorted``) exposes the
same small surface used by the simulators:

``sf(x)``, ``cdf(x)``, ``isf(s)``, ``ppf(q)``, ``sample(rng, size)``,
``raw_moment(k)``, ``moments()`` and ``truncation``.

Sampling always goes through ``isf`` with a survival level drawn as
``1 - U``; keeping the draw in survival space preserves precision in the
upper tail, which is where catastrophe losses live.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy import integrate, optimize, special

from .errors import InfiniteMoment, InvalidSample, NonConvergence

DEFAULT_TRUNCATION = 0.025

_LOG_2PI = math.log(2.0 * math.pi)


def _as_array(x):
    return np.asarray(x, dtype=float)


def _scalarize(out, like):
    if np.ndim(like) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Parametric families (untruncated)
# ---------------------------------------------------------------------------


class SeverityFamily:
    """Base class for the four parametric families.

    Subclasses implement ``logsf``, ``logpdf``, ``isf`` and
    ``partial_moment`` on positive reals; conditioning on the truncation point
    happens in ``TruncatedSeverity``.
    """

    name: ClassVar[str]
    param_names: ClassVar[tuple[str, ...]]

    def params(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in self.param_names}

    def sf(self, x):
        return np.exp(self.logsf(x))

    def cdf(self, x):
        return -np.expm1(self.logsf(x))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    # unconstrained optimisation coordinates
    def to_unconstrained(self) -> np.ndarray:
        return np.log([getattr(self, k) for k in self.param_names])

    @classmethod
    def from_unconstrained(cls, theta):
        return cls(*(float(v) for v in np.exp(theta)))

    def partial_moment(self, k: int, u: float) -> float:
        """E[X^k ; X > u], possibly ``inf``."""
        raise NotImplementedError


@dataclass(frozen=True)
class LogNormal(SeverityFamily):
    mu: float
    sigma: float

    name: ClassVar[str] = "lognormal"
    param_names: ClassVar[tuple[str, ...]] = ("mu", "sigma")

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.mu)):
            raise ValueError(f"invalid log-normal parameters mu={self.mu}, sigma={self.sigma}")

    def _z(self, x):
        with np.errstate(divide="ignore"):
            return (np.log(x) - self.mu) / self.sigma

    def logsf(self, x):
        x = _as_array(x)
        return _scalarize(special.log_ndtr(-self._z(np.maximum(x, 0.0))), x)

    def logpdf(self, x):
        x = _as_array(x)
        z = self._z(x)
        with np.errstate(divide="ignore"):
            out = -np.log(x) - math.log(self.sigma) - 0.5 * _LOG_2PI - 0.5 * z * z
        return _scalarize(np.where(x > 0, out, -np.inf), x)

    def isf(self, s):
        s = _as_array(s)
        return _scalarize(np.exp(self.mu - self.sigma * special.ndtri(s)), s)

    def to_unconstrained(self):
        return np.array([self.mu, math.log(self.sigma)])

    @classmethod
    def from_unconstrained(cls, theta):
        return cls(float(theta[0]), float(math.exp(theta[1])))

    def partial_moment(self, k, u):
        full = math.exp(k * self.mu + 0.5 * (k * self.sigma) ** 2)
        if u <= 0:
            return full
        return full * float(special.ndtr((self.mu + k * self.sigma**2 - math.log(u)) / self.sigma))


@dataclass(frozen=True)
class Pareto(SeverityFamily):
    """Generalised-Pareto form ``F(x) = 1 - (1 + k x / sigma) ** (-1 / k)``.

    ``k`` is the shape (tail index ``1/k``), ``sigma`` the scale.  The
    conditional excess over any level ``u`` is again of this form with scale
    ``sigma + k u``, which gives closed-form truncated moments.
    """

    k: float
    sigma: float

    name: ClassVar[str] = "pareto"
    param_names: ClassVar[tuple[str, ...]] = ("k", "sigma")

    def __post_init__(self):
        if not (self.k > 0 and self.sigma > 0):
            raise ValueError(f"invalid Pareto parameters k={self.k}, sigma={self.sigma}")

    def logsf(self, x):
        x = _as_array(x)
        xp = np.maximum(x, 0.0)
        return _scalarize(-np.log1p(self.k * xp / self.sigma) / self.k, x)

    def logpdf(self, x):
        x = _as_array(x)
        xp = np.maximum(x, 0.0)
        out = -math.log(self.sigma) - (1.0 / self.k + 1.0) * np.log1p(self.k * xp / self.sigma)
        return _scalarize(np.where(x >= 0, out, -np.inf), x)

    def isf(self, s):
        s = _as_array(s)
        with np.errstate(divide="ignore"):
            out = self.sigma / self.k * np.expm1(-self.k * np.log(s))
        return _scalarize(out, s)

    def partial_moment(self, k, u):
        u = max(u, 0.0)
        if k * self.k >= 1:
            return math.inf
        scale = self.sigma + self.k * u
        # X | X > u  =  u + Y,  Y ~ GPD(self.k, scale)
        total = 0.0
        for j in range(k + 1):
            ey = scale**j * math.factorial(j) / math.prod(1 - i * self.k for i in range(1, j + 1))
            total += math.comb(k, j) * u ** (k - j) * ey
        return total * math.exp(self.logsf(u))


@dataclass(frozen=True)
class InverseGaussian(SeverityFamily):
    """Inverse Gaussian with mean ``mu`` and shape ``lam``."""

    mu: float
    lam: float

    name: ClassVar[str] = "invgauss"
    param_names: ClassVar[tuple[str, ...]] = ("mu", "lam")

    def __post_init__(self):
        if not (self.mu > 0 and self.lam > 0):
            raise ValueError(f"invalid inverse Gaussian parameters mu={self.mu}, lam={self.lam}")

    def logsf(self, x):
        x = _as_array(x)
        xp = np.maximum(x, 1e-300)
        r = np.sqrt(self.lam / xp)
        a = r * (xp / self.mu - 1.0)
        b = r * (xp / self.mu + 1.0)
        la = special.log_ndtr(-a)
        lb = 2.0 * self.lam / self.mu + special.log_ndtr(-b)
        # sf = Phi(-a) - exp(2 lam / mu) Phi(-b); second term is always smaller
        with np.errstate(divide="ignore", invalid="ignore"):
            out = la + np.log1p(-np.exp(np.minimum(lb - la, 0.0)))
        out = np.where(x > 0, out, 0.0)
        return _scalarize(out, x)

    def logpdf(self, x):
        x = _as_array(x)
        xp = np.maximum(x, 1e-300)
        out = 0.5 * (math.log(self.lam) - _LOG_2PI - 3.0 * np.log(xp)) - self.lam * (
            xp - self.mu
        ) ** 2 / (2.0 * self.mu**2 * xp)
        return _scalarize(np.where(x > 0, out, -np.inf), x)

    def isf(self, s):
        s = _as_array(s)
        out = _invert_logsf(self, np.log(np.clip(s, 0.0, 1.0)), lower=0.0)
        return _scalarize(out, s)

    def partial_moment(self, k, u):
        return _quad_partial_moment(self, k, u)


@dataclass(frozen=True)
class Weibull(SeverityFamily):
    shape: float
    scale: float

    name: ClassVar[str] = "weibull"
    param_names: ClassVar[tuple[str, ...]] = ("shape", "scale")

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError(f"invalid Weibull parameters shape={self.shape}, scale={self.scale}")

    def logsf(self, x):
        x = _as_array(x)
        return _scalarize(-((np.maximum(x, 0.0) / self.scale) ** self.shape), x)

    def logpdf(self, x):
        x = _as_array(x)
        with np.errstate(divide="ignore"):
            y = np.maximum(x, 0.0) / self.scale
            out = (
                math.log(self.shape / self.scale)
                + (self.shape - 1.0) * np.log(y)
                - y**self.shape
            )
        return _scalarize(np.where(x > 0, out, -np.inf), x)

    def isf(self, s):
        s = _as_array(s)
        with np.errstate(divide="ignore"):
            out = self.scale * (-np.log(s)) ** (1.0 / self.shape)
        return _scalarize(out, s)

    def partial_moment(self, k, u):
        a = 1.0 + k / self.shape
        t = (max(u, 0.0) / self.scale) ** self.shape
        return float(self.scale**k * special.gamma(a) * special.gammaincc(a, t))


FAMILIES: dict[str, type[SeverityFamily]] = {
    cls.name: cls for cls in (LogNormal, Pareto, InverseGaussian, Weibull)
}


def family_from_dict(doc: dict) -> SeverityFamily:
    cls = FAMILIES[doc["family"]]
    return cls(**{k: float(doc["params"][k]) for k in cls.param_names})


def _invert_logsf(dist: SeverityFamily, log_target, lower: float, tol: float = 1e-10):
    with np.errstate(all="ignore"):
        return _invert_logsf_impl(dist, log_target, lower, tol)


def _invert_logsf_impl(dist, log_target, lower, tol):
    """Solve ``dist.logsf(x) = log_target`` for ``x > lower`` elementwise.

    Safeguarded Newton on ``t = log x``: every iterate is kept inside a
    bracket that is tightened on each step, and a bisection step replaces any
    Newton step that leaves it.
    """
    log_target = np.atleast_1d(np.asarray(log_target, dtype=float))
    out = np.full(log_target.shape, np.nan)
    out[log_target >= 0.0] = lower
    out[np.isneginf(log_target)] = np.inf
    todo = np.isfinite(log_target) & (log_target < 0.0)
    if not todo.any():
        return out
    lt = log_target[todo]

    def g(t):
        return dist.logsf(np.exp(t)) - lt

    t = _log_quantile_guess(dist, lt)
    if lower > 0:
        t = np.maximum(t, math.log(lower))
    lo = t - 1.0
    hi = t + 1.0
    if lower > 0:
        lo = np.maximum(lo, math.log(lower))
    for _ in range(100):
        bad = g(lo) < 0
        if not bad.any():
            break
        lo[bad] -= 4.0
    for _ in range(100):
        bad = g(hi) > 0
        if not bad.any():
            break
        hi[bad] += 4.0
    t = np.clip(t, lo, hi)
    active = np.ones(t.shape, dtype=bool)
    for _ in range(200):
        ta = t[active]
        x = np.exp(ta)
        ga = dist.logsf(x) - lt[active]
        lo_a, hi_a = lo[active], hi[active]
        # g is decreasing in t
        lo_a = np.where(ga > 0, ta, lo_a)
        hi_a = np.where(ga <= 0, ta, hi_a)
        dg = -np.exp(ta + dist.logpdf(x) - dist.logsf(x))
        with np.errstate(divide="ignore", invalid="ignore"):
            step = ga / dg
        tn = ta - step
        outside = ~np.isfinite(tn) | (tn <= lo_a) | (tn >= hi_a)
        tn = np.where(outside, 0.5 * (lo_a + hi_a), tn)
        done = (np.abs(tn - ta) < tol) | (hi_a - lo_a < tol)
        t[active] = tn
        lo[active], hi[active] = lo_a, hi_a
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    out[todo] = np.exp(t)
    return out


def _log_quantile_guess(dist, log_s):
    """Log-quantile of the log-normal sharing the family's mean and variance."""
    if isinstance(dist, InverseGaussian):
        mean, var = dist.mu, dist.mu**3 / dist.lam
    else:
        mean, var = 1.0, 1.0
    s2 = math.log1p(var / mean**2)
    return math.log(mean) - 0.5 * s2 - math.sqrt(s2) * special.ndtri(np.exp(log_s))


def _quad_partial_moment(dist: SeverityFamily, k: int, u: float) -> float:
    u = max(u, 0.0)

    def f(x):
        return x**k * math.exp(dist.logpdf(x))

    scale = getattr(dist, "mu", 1.0)
    pts = sorted({u, max(u, scale * 0.1), max(u, scale), max(u, 10 * scale), max(u, 100 * scale)})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            total += integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    total += integrate.quad(f, pts[-1], np.inf, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    return total


# ---------------------------------------------------------------------------
# Truncated severity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncatedSeverity:
    """A family conditioned on exceeding ``truncation``."""

    family: SeverityFamily
    truncation: float = DEFAULT_TRUNCATION

    def __post_init__(self):
        if not (self.truncation >= 0 and math.isfinite(self.truncation)):
            raise ValueError(f"truncation must be finite and >= 0, got {self.truncation}")

    @property
    def log_sf_truncation(self) -> float:
        return float(self.family.logsf(self.truncation)) if self.truncation > 0 else 0.0

    def logsf(self, x):
        x = _as_array(x)
        out = np.where(x > self.truncation, self.family.logsf(x) - self.log_sf_truncation, 0.0)
        return _scalarize(np.minimum(out, 0.0), x)

    def sf(self, x):
        return np.exp(self.logsf(x))

    def cdf(self, x):
        return -np.expm1(self.logsf(x))

    def logpdf(self, x):
        x = _as_array(x)
        out = np.where(x >= self.truncation, self.family.logpdf(x) - self.log_sf_truncation, -np.inf)
        return _scalarize(out, x)

    def isf(self, s):
        """Quantile at survival level ``s`` of the conditional distribution."""
        s = _as_array(s)
        with np.errstate(divide="ignore"):
            log_target = np.log(np.clip(s, 0.0, 1.0)) + self.log_sf_truncation
        if isinstance(self.family, InverseGaussian):
            out = _invert_logsf(self.family, log_target, lower=self.truncation).reshape(np.shape(s))
        else:
            out = self.family.isf(np.exp(log_target))
        return _scalarize(np.maximum(out, self.truncation), s)

    def ppf(self, q):
        return self.isf(1.0 - _as_array(q))

    def sample(self, rng: np.random.Generator, size=None):
        return self.isf(1.0 - rng.random(size))

    def raw_moment(self, k: int) -> float:
        pm = self.family.partial_moment(k, self.truncation)
        if not math.isfinite(pm):
            raise InfiniteMoment(f"E[X^{k}] diverges for {self.family}")
        return pm / math.exp(self.log_sf_truncation)

    def moments(self) -> tuple[float, float]:
        m1 = self.raw_moment(1)
        m2 = self.raw_moment(2)
        return float(m1), float(max(m2 - m1 * m1, 0.0))

    def to_dict(self) -> dict:
        return {"family": self.family.name, "params": self.family.params(), "truncation": self.truncation}

    @classmethod
    def from_dict(cls, doc: dict) -> "TruncatedSeverity":
        if "lambda" in doc:
            raise ValueError("distorted severities are not serialisable")
        return cls(family_from_dict(doc), float(doc.get("truncation", DEFAULT_TRUNCATION)))


def truncated_cdf(dist: TruncatedSeverity, x):
    return dist.cdf(x)


def sample_truncated(dist, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)


def truncated_moments(dist) -> tuple[float, float]:
    return dist.moments()


# ---------------------------------------------------------------------------
# Wang distortion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WangDistortion:
    lam: float

    def __call__(self, prob):
        """Distort a cdf value: ``Phi(Phi^-1(F) + lam)``."""
        return special.ndtr(special.ndtri(prob) + self.lam)


@dataclass(frozen=True)
class WangDistorted:
    """Severity whose cdf is ``Phi(Phi^-1(F_u(x)) + lam)``.

    Negative ``lam`` shifts mass to the right (risk loading on losses).
    """

    base: TruncatedSeverity
    lam: float

    @property
    def truncation(self) -> float:
        return self.base.truncation

    def sf(self, x):
        if self.lam == 0:
            return self.base.sf(x)
        return special.ndtr(special.ndtri(self.base.sf(x)) - self.lam)

    def cdf(self, x):
        if self.lam == 0:
            return self.base.cdf(x)
        return special.ndtr(special.ndtri(self.base.cdf(x)) + self.lam)

    def isf(self, s):
        if self.lam == 0:
            return self.base.isf(s)
        return self.base.isf(special.ndtr(special.ndtri(_as_array(s)) + self.lam))

    def ppf(self, q):
        return self.isf(1.0 - _as_array(q))

    def sample(self, rng: np.random.Generator, size=None):
        return self.isf(1.0 - rng.random(size))

    def raw_moment(self, k: int) -> float:
        self.base.raw_moment(k)  # raises InfiniteMoment for divergent tails
        if self.lam == 0:
            return self.base.raw_moment(k)

        # E*[X^k] = int isf_u(Phi(w))^k phi(w - lam) dw
        def f(w):
            return float(self.base.isf(special.ndtr(w))) ** k * math.exp(-0.5 * (w - self.lam) ** 2)

        val = integrate.quad(f, self.lam - 14.0, self.lam + 14.0, epsabs=0.0, epsrel=1e-11, limit=400)[0]
        return val / math.sqrt(2.0 * math.pi)

    def moments(self) -> tuple[float, float]:
        m1 = self.raw_moment(1)
        m2 = self.raw_moment(2)
        return float(m1), float(max(m2 - m1 * m1, 0.0))


def apply_wang(dist, distortion: WangDistortion | float):
    lam = distortion.lam if isinstance(distortion, WangDistortion) else float(distortion)
    if isinstance(dist, WangDistorted):
        # Phi^-1 o Phi cancels, so distortions compose additively
        return WangDistorted(dist.base, dist.lam + lam)
    return WangDistorted(dist, lam)


# ---------------------------------------------------------------------------
# Maximum likelihood under left truncation
# ---------------------------------------------------------------------------


def conditional_nll(family_cls: type[SeverityFamily], theta, x, truncation: float) -> float:
    """Mean negative log-likelihood of ``f(x) / S(u)``."""
    try:
        fam = family_cls.from_unconstrained(theta)
    except (ValueError, OverflowError):
        return np.inf
    with np.errstate(all="ignore"):
        ll = fam.logpdf(x).mean()
        if truncation > 0:
            ll -= fam.logsf(truncation)
    if not np.isfinite(ll):
        return np.inf
    return -float(ll)


def _lognormal_nll_grad(theta, x_log, truncation):
    mu, log_s = theta
    if not (abs(log_s) < 20.0 and math.isfinite(mu)):
        return math.inf, np.full(2, np.nan)
    s = math.exp(log_s)
    z = (x_log - mu) / s
    n_term = 0.5 * _LOG_2PI + log_s
    val = float(np.mean(x_log + n_term + 0.5 * z * z))
    g_mu = -float(np.mean(z)) / s
    g_ls = float(np.mean(1.0 - z * z))
    if truncation > 0:
        zu = (math.log(truncation) - mu) / s
        log_surv = float(special.log_ndtr(-zu))
        hazard = math.exp(-0.5 * zu * zu - 0.5 * _LOG_2PI - log_surv)
        val += log_surv
        g_mu += hazard / s
        g_ls += hazard * zu
    return val, np.array([g_mu, g_ls])


def _lognormal_newton(theta, x_log, truncation, gtol=1e-10, maxiter=50):
    """Damped Newton on the log-normal conditional likelihood; ``None`` on failure."""
    theta = np.array(theta, dtype=float)
    val, grad = _lognormal_nll_grad(theta, x_log, truncation)
    for _ in range(maxiter):
        if np.max(np.abs(grad)) < gtol:
            return theta
        mu, log_s = theta
        s = math.exp(log_s)
        z = (x_log - mu) / s
        mz, mz2 = float(np.mean(z)), float(np.mean(z * z))
        h_mm, h_ma, h_aa = 1.0 / s**2, 2.0 * mz / s, 2.0 * mz2
        if truncation > 0:
            zu = (math.log(truncation) - mu) / s
            hz = math.exp(-0.5 * zu * zu - 0.5 * _LOG_2PI - float(special.log_ndtr(-zu)))
            dh = hz * (hz - zu)
            h_mm -= dh / s**2
            h_ma -= dh * zu / s + hz / s
            h_aa -= dh * zu * zu + hz * zu
        hess = np.array([[h_mm, h_ma], [h_ma, h_aa]])
        det = h_mm * h_aa - h_ma * h_ma
        if h_mm > 0 and det > 0:
            step = np.linalg.solve(hess, grad)
        else:  # indefinite away from the optimum
            step = grad
        norm = float(np.max(np.abs(step)))
        if norm > 1.0:
            step = step / norm
        t = 1.0
        while t > 1e-8:
            cand = theta - t * step
            cval, cgrad = _lognormal_nll_grad(cand, x_log, truncation)
            if np.isfinite(cval) and cval <= val + 1e-14 * abs(val):
                theta, val, grad = cand, cval, cgrad
                break
            t *= 0.5
        else:
            return theta if np.max(np.abs(grad)) < 1e-7 else None
    return theta if np.max(np.abs(grad)) < 1e-7 else None


# Standardised depth of the truncation point below the log-normal median at
# which the boundary fit stops.  Beyond it the truncated law is a power tail
# and the likelihood keeps creeping upward as mu -> -inf.
LOGNORMAL_MAX_DEPTH = 8.0


class BoundaryFitWarning(UserWarning):
    """The likelihood supremum lies on the edge of the parameter space."""


def _lognormal_bounded(theta, x_log, truncation):
    """Log-normal MLE over ``(log u - mu) / sigma <= LOGNORMAL_MAX_DEPTH``.

    Works in ``(a, log sigma)`` with ``mu = log u - a sigma`` so the
    constraint is a box.  Returns ``(theta, value, on_boundary)``.
    """
    log_u = math.log(truncation)

    def to_theta(v):
        a, log_s = v
        return np.array([log_u - a * math.exp(log_s), log_s])

    def fg(v):
        th = to_theta(v)
        val, g = _lognormal_nll_grad(th, x_log, truncation)
        if not np.isfinite(val):
            return 1e300, np.zeros(2)
        s = math.exp(v[1])
        return val, np.array([-s * g[0], g[1] - v[0] * s * g[0]])

    mu, log_s = theta
    a0 = min((log_u - mu) / math.exp(log_s), LOGNORMAL_MAX_DEPTH)
    res = optimize.minimize(
        fg,
        [a0, log_s],
        jac=True,
        method="L-BFGS-B",
        bounds=[(-50.0, LOGNORMAL_MAX_DEPTH), (-15.0, 15.0)],
        options={"ftol": 1e-15, "gtol": 1e-9, "maxiter": 500},
    )
    on_boundary = res.x[0] >= LOGNORMAL_MAX_DEPTH - 1e-9
    return to_theta(res.x), float(res.fun), on_boundary


def _initial_guesses(family_cls, x, truncation) -> list[np.ndarray]:
    lx = np.log(x)
    m, v = float(x.mean()), float(x.var()) or float(x.mean()) ** 2
    lm, ls = float(lx.mean()), float(lx.std()) or 1.0
    if family_cls is LogNormal:
        base = [np.array([lm, math.log(ls)])]
        base.append(np.array([lm - ls, math.log(1.5 * ls)]))
    elif family_cls is Weibull:
        c = 1.2825 / ls
        base = [np.log([c, math.exp(lm + 0.5772 / c)]), np.log([0.5 * c, m])]
    elif family_cls is InverseGaussian:
        base = [np.log([m, m**3 / v]), np.log([0.5 * m, m**3 / v])]
    elif family_cls is Pareto:
        base = []
        for k0 in (0.2, 0.6, 1.2):
            sig = max(m - truncation, 1e-6) * max(1 - k0, 0.2) - k0 * truncation
            base.append(np.log([k0, max(sig, 0.1 * max(m - truncation, 1e-6))]))
    else:  # pragma: no cover
        raise ValueError(family_cls)
    return base


def fit_truncated_mle(
    sample,
    family: str | type[SeverityFamily],
    truncation: float = DEFAULT_TRUNCATION,
    *,
    start: SeverityFamily | None = None,
    tol: float = 1e-8,
    maxiter: int = 4000,
) -> SeverityFamily:
    """Fit ``family`` to ``sample`` by maximising the conditional likelihood.

    Parameters
    ----------
    sample : array_like
        Observed losses, all ``>= truncation``.
    family : str or family class
        One of ``"lognormal"``, ``"pareto"``, ``"invgauss"``, ``"weibull"``.
    truncation : float
        Reporting threshold ``u``; the likelihood is ``f(x) / (1 - F(u))``.
    start : SeverityFamily, optional
        Warm start.  When given (the bootstrap path) only that start is tried.

    Returns
    -------
    SeverityFamily
        The fitted untruncated family; wrap it in ``TruncatedSeverity`` to
        obtain the conditional distribution.
    """
    family_cls = FAMILIES[family] if isinstance(family, str) else family
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1 or x.size < 5:
        raise InvalidSample(f"need at least 5 observations, got {x.size}")
    if not np.all(np.isfinite(x)) or np.any(x < truncation) or np.any(x <= 0):
        raise InvalidSample("sample contains values below the truncation point")

    lx = np.log(x)
    if family_cls is LogNormal:

        def fun(theta):
            return _lognormal_nll_grad(theta, lx, truncation)[0]

    else:

        def fun(theta):
            return conditional_nll(family_cls, theta, x, truncation)

    def refine(theta0):
        """Gradient-based polish; returns ``(theta, value)`` or ``None``."""
        if family_cls is LogNormal:
            theta = _lognormal_newton(theta0, lx, truncation)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = optimize.minimize(fun, theta0, method="BFGS", options={"gtol": 1e-7, "maxiter": 200})
            theta = res.x if (res.success or np.linalg.norm(res.jac) < 1e-5) else None
        if theta is None or not np.isfinite(fun(theta)):
            return None
        return np.asarray(theta), fun(theta)

    def simplex(theta0):
        res = optimize.minimize(
            fun,
            theta0,
            method="Nelder-Mead",
            options={"xatol": tol, "fatol": tol * 1e-3, "maxiter": maxiter, "maxfev": 2 * maxiter},
        )
        polished = refine(res.x)
        if polished is not None and polished[1] <= res.fun + 1e-12:
            return polished
        if res.success:
            return res.x, res.fun
        # A collapsed simplex that is still moving means the likelihood is flat
        # along a ridge running off to the edge of the parameter space.
        spread = float(np.ptp(res.final_simplex[1]))
        if np.isfinite(res.fun) and spread <= 1e-9 * max(1.0, abs(res.fun)):
            ridge.append(res.x)
            return res.x, res.fun
        return None

    starts = [start.to_unconstrained()] if start is not None else _initial_guesses(family_cls, x, truncation)
    best = None
    ridge: list[np.ndarray] = []
    if family_cls is LogNormal:
        for theta0 in starts:
            found = refine(theta0)
            if found is not None and (best is None or found[1] < best[1]):
                best = found
        if best is None and truncation > 0:
            theta, val, on_boundary = _lognormal_bounded(starts[0], lx, truncation)
            if np.isfinite(val) and val < 1e300:
                if on_boundary:
                    warnings.warn(
                        "log-normal likelihood increases without bound towards mu -> -inf; "
                        f"returning the fit at depth {LOGNORMAL_MAX_DEPTH}",
                        BoundaryFitWarning,
                        stacklevel=2,
                    )
                best = (theta, val)
        starts = []
    for theta0 in starts:
        if not np.isfinite(fun(theta0)):
            continue
        found = refine(theta0) if start is not None else None
        if found is None:
            found = simplex(theta0)
        if found is not None and (best is None or found[1] < best[1]):
            best = found
    if best is None:
        raise NonConvergence(f"{family_cls.name} fit did not converge")
    if any(r is best[0] for r in ridge):
        warnings.warn(
            f"{family_cls.name} likelihood is flat along a ridge; the returned point is one of many near-equal fits",
            BoundaryFitWarning,
            stacklevel=2,
        )
    try:
        return family_cls.from_unconstrained(best[0])
    except (ValueError, OverflowError) as exc:
        raise NonConvergence(str(exc)) from exc
