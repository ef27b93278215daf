"""Two-region catastrophe bond pricing under compound Poisson loss models."""

from .distributions import (
    DEFAULT_TRUNCATION,
    InverseGaussian,
    LogNormal,
    Pareto,
    TruncatedSeverity,
    WangDistortion,
    Weibull,
    apply_wang,
    fit_truncated_mle,
)
from .models import Dependent, Independent, Proportional, analytic_moments, simulate_aggregate
from .pricing import BondSpec, bvn_cdf, mc_price, normal_approx_price, price_surface, wang_price_curve

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TRUNCATION",
    "BondSpec",
    "Dependent",
    "Independent",
    "InverseGaussian",
    "LogNormal",
    "Pareto",
    "Proportional",
    "TruncatedSeverity",
    "WangDistortion",
    "Weibull",
    "analytic_moments",
    "apply_wang",
    "bvn_cdf",
    "fit_truncated_mle",
    "mc_price",
    "normal_approx_price",
    "price_surface",
    "simulate_aggregate",
    "wang_price_curve",
]
