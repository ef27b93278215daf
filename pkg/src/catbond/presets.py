"""Fitted parameter sets for the Oklahoma/Texas and Illinois/Kentucky case studies.

Intensities are events per year, severities are left-truncated at 0.025
(billion USD).  Region 1 is the first-named state.
"""

from __future__ import annotations

from .distributions import (
    DEFAULT_TRUNCATION,
    InverseGaussian,
    LogNormal,
    Pareto,
    SeverityFamily,
    TruncatedSeverity,
    family_from_dict,
)
from .models import Dependent, Independent, Proportional

OK_TX = {
    "regions": ("OK", "TX"),
    "intensity": {"all1": 2.89, "all2": 6.04, "only1": 1.53, "only2": 4.76, "common": 1.40},
    "severity": {
        "all1": LogNormal(-4.783, 1.841),
        "all2": LogNormal(-2.702, 1.246),
        "only1": LogNormal(-5.012, 1.864),
        "only2": LogNormal(-2.807, 1.266),
        "total_common": LogNormal(-1.477, 0.902),
        "common1": LogNormal(-4.564, 1.812),
        "common2": InverseGaussian(0.181, 0.098),
    },
    "p": 0.41,
    "spearman_rho": 0.31,
    # event counts over the observation window
    "counts": {"all1": 85, "all2": 163, "common": 44},
}

IL_KY = {
    "regions": ("IL", "KY"),
    "intensity": {"all1": 3.59, "all2": 1.46, "only1": 2.72, "only2": 0.59, "common": 0.89},
    "severity": {
        "all1": LogNormal(-4.554, 1.386),
        "all2": LogNormal(-4.869, 1.736),
        "only1": LogNormal(-5.288, 1.569),
        "only2": LogNormal(-4.709, 1.749),
        "total_common": LogNormal(-1.942, 0.718),
        "common1": Pareto(0.314, 0.032),
        "common2": LogNormal(-4.918, 1.713),
    },
    "p": 0.49,
    "spearman_rho": 0.22,
    "counts": {"all1": 111, "all2": 45, "common": 18},
}

PRESETS = {"ok_tx": OK_TX, "il_ky": IL_KY}


def build_models(preset: dict | str, truncation: float = DEFAULT_TRUNCATION) -> dict:
    """The three region models for a preset, keyed by model kind.

    Severities may be family objects or their ``{"family", "params"}`` dicts.
    """
    if isinstance(preset, str):
        preset = PRESETS[preset]
    lam = {k: float(v) for k, v in preset["intensity"].items()}
    sev = {
        k: TruncatedSeverity(f if isinstance(f, SeverityFamily) else family_from_dict(f), truncation)
        for k, f in preset["severity"].items()
    }
    return {
        "independent": Independent(lam["all1"], lam["all2"], sev["all1"], sev["all2"]),
        "proportional": Proportional(
            lam["only1"], lam["common"], lam["only2"], sev["only1"], sev["only2"], sev["total_common"], preset["p"]
        ),
        "dependent": Dependent(
            lam["only1"],
            lam["common"],
            lam["only2"],
            sev["only1"],
            sev["only2"],
            sev["common1"],
            sev["common2"],
            preset["spearman_rho"],
        ),
    }
