import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from catbond.distributions import LogNormal, TruncatedSeverity
from catbond.errors import DegenerateVariance
from catbond.models import BivariateMoments, GaussianSurrogate, Independent, analytic_moments
from catbond.presets import build_models
from catbond.pricing import (
    CSV_COLUMNS,
    BondSpec,
    bvn_cdf,
    distort_model,
    mc_price,
    normal_approx_price,
    price_surface,
    relative_error,
    wang_price_curve,
)

OK_TX = build_models("ok_tx")
IL_KY = build_models("il_ky")
BOND = BondSpec(2.0, 0.03, 0.0, 6.0, 8.0)


def bvn_quad(h, k, r):
    """P(Z1 <= h, Z2 <= k) as a 1-D integral of the conditional normal cdf."""
    s = math.sqrt(1 - r * r)
    f = lambda x: stats.norm.pdf(x) * stats.norm.cdf((k - r * x) / s)
    return integrate.quad(f, -np.inf, h, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


# ---------------------------------------------------------------------------
# bond specification
# ---------------------------------------------------------------------------


def test_bond_validation():
    with pytest.raises(ValueError):
        BondSpec(0.0, 0.03, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        BondSpec(1.0, 0.03, 1.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        BondSpec(1.0, 0.03, 0.0, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["independent", "proportional", "dependent"])
def test_full_recovery_pays_discount(kind):
    bond = BondSpec(2.0, 0.03, 1.0, 6.0, 8.0)
    est = mc_price(OK_TX[kind], bond, 2000, 1)
    assert est.price == math.exp(-0.03 * 2.0)
    assert est.std_error == 0.0


def test_thresholds_below_truncation_need_no_events():
    sev = TruncatedSeverity(LogNormal(-4.783, 1.841), 0.025)
    model = Independent(1.0, 1.0, sev, sev)
    bond = BondSpec(1.0, 0.0, 0.0, 0.025, 0.025)
    est = mc_price(model, bond, 100_000, 3)
    assert abs(est.price - math.exp(-2.0)) < 3 * est.std_error


def test_model1_mc_close_to_normal_at_reference_point():
    model = OK_TX["independent"]
    mc = mc_price(model, BOND, 20_000, 42)
    approx = normal_approx_price(analytic_moments(model, 2.0), BOND)
    assert abs(approx.price - mc.price) / mc.price <= 0.05


def test_mc_requires_enough_paths():
    with pytest.raises(ValueError):
        mc_price(OK_TX["independent"], BOND, 50, 0)


@pytest.mark.parametrize("kind", ["independent", "proportional", "dependent"])
def test_price_bounds(kind):
    bond = BondSpec(2.0, 0.05, 0.3, 1.0, 1.5)
    est = mc_price(OK_TX[kind], bond, 5000, 2)
    d = math.exp(-0.05 * 2)
    assert 0.3 * d <= est.price <= d
    assert 0 <= est.trigger_probability <= 1


def test_discounting_identity_under_common_seeds():
    model = OK_TX["dependent"]
    a = mc_price(model, BondSpec(2.0, 0.03, 0.2, 6.0, 8.0), 10_000, 11)
    b = mc_price(model, BondSpec(2.0, 0.07, 0.2, 6.0, 8.0), 10_000, 11)
    assert b.price == pytest.approx(math.exp(-(0.07 - 0.03) * 2.0) * a.price, rel=1e-14)


def test_standard_error_is_binomial():
    est = mc_price(OK_TX["independent"], BOND, 10_000, 4)
    q = 1 - est.trigger_probability
    assert est.std_error == pytest.approx(math.exp(-0.06) * math.sqrt(q * (1 - q) / 10_000), rel=1e-12)


def test_gaussian_surrogate_converges_to_normal_price():
    """Direct bivariate-normal sampling isolates the kernel from model error."""
    for kind in ("independent", "proportional", "dependent"):
        m = analytic_moments(OK_TX[kind], 2.0)
        bond = BondSpec(2.0, 0.03, 0.0, m.mean1 + 0.5 * math.sqrt(m.var1), m.mean2 + math.sqrt(m.var2))
        mc = mc_price(GaussianSurrogate(m), bond, 100_000, 5)
        approx = normal_approx_price(m, bond)
        assert 0.05 < mc.trigger_probability < 0.95
        assert abs(mc.price - approx.price) <= 3 * mc.std_error


# ---------------------------------------------------------------------------
# bivariate normal kernel
# ---------------------------------------------------------------------------


def test_bvn_independence():
    assert bvn_cdf(0.0, 0.0, 0.0) == pytest.approx(0.25, abs=1e-15)
    for h, k in [(0.3, -1.2), (2.0, 1.0), (-3.0, 0.5)]:
        assert bvn_cdf(h, k, 0.0) == pytest.approx(stats.norm.cdf(h) * stats.norm.cdf(k), abs=1e-15)


def test_bvn_orthant_half():
    assert bvn_cdf(0.0, 0.0, 0.5) == pytest.approx(1 / 3, abs=1e-15)


@pytest.mark.parametrize("rho", np.round(np.arange(-0.9, 0.91, 0.1), 2))
def test_bvn_orthant(rho):
    assert abs(bvn_cdf(0.0, 0.0, rho) - (0.25 + math.asin(rho) / (2 * math.pi))) <= 1e-7


def test_bvn_against_quadrature_random_triples():
    rng = np.random.default_rng(99)
    for _ in range(60):
        h, k = rng.uniform(-4, 4, 2)
        r = rng.uniform(-0.999, 0.999)
        assert abs(bvn_cdf(h, k, r) - bvn_quad(h, k, r)) <= 1e-7


def test_bvn_boundaries():
    assert bvn_cdf(0.3, -0.2, 1.0) == pytest.approx(stats.norm.cdf(-0.2), abs=1e-15)
    assert bvn_cdf(0.3, 0.2, -1.0) == pytest.approx(stats.norm.cdf(0.3) + stats.norm.cdf(0.2) - 1, abs=1e-15)
    assert bvn_cdf(math.inf, 0.4, 0.3) == pytest.approx(stats.norm.cdf(0.4), abs=1e-15)
    assert bvn_cdf(-math.inf, 0.4, 0.3) == 0.0
    with pytest.raises(ValueError):
        bvn_cdf(0.0, 0.0, 1.5)


@settings(max_examples=100, deadline=None)
@given(h=st.floats(-6, 6), k=st.floats(-6, 6), r=st.floats(-0.9999, 0.9999))
def test_property_bvn_symmetric_and_bounded(h, k, r):
    v = bvn_cdf(h, k, r)
    assert 0.0 <= v <= min(stats.norm.cdf(h), stats.norm.cdf(k)) + 1e-12
    assert v == pytest.approx(bvn_cdf(k, h, r), abs=1e-12)


# ---------------------------------------------------------------------------
# normal approximation
# ---------------------------------------------------------------------------


def test_normal_price_orthant_case():
    m = BivariateMoments(0.0, 0.0, 1.0, 1.0, 0.0)
    est = normal_approx_price(m, BondSpec(3.0, 0.0, 0.0, 1e-300, 1e-300))
    assert est.price == pytest.approx(0.25, abs=1e-12)
    assert est.std_error == 0.0
    assert est.trigger_probability == pytest.approx(0.75, abs=1e-12)


def test_normal_price_large_thresholds():
    m = analytic_moments(OK_TX["dependent"], 2.0)
    est = normal_approx_price(m, BondSpec(2.0, 0.03, 0.0, 1e6, 1e6))
    assert est.price == pytest.approx(math.exp(-0.06), abs=1e-15)


def test_normal_price_degenerate_variance():
    with pytest.raises(DegenerateVariance):
        normal_approx_price(BivariateMoments(0.0, 0.0, 0.0, 1.0, 0.0), BOND)


# ---------------------------------------------------------------------------
# surfaces
# ---------------------------------------------------------------------------


def test_single_cell_surface_matches_point_prices():
    model = OK_TX["proportional"]
    mc = price_surface(model, BOND, [6.0], [8.0], "mc", n_sims=20_000, seed=42)
    point = mc_price(model, BOND, 20_000, 42)
    assert mc.price[0, 0] == point.price
    assert mc.std_error[0, 0] == point.std_error
    nrm = price_surface(model, BOND, [6.0], [8.0], "normal")
    assert nrm.price[0, 0] == normal_approx_price(analytic_moments(model, 2.0), BOND).price


@pytest.mark.parametrize("pair", ["ok_tx", "il_ky"])
@pytest.mark.parametrize("kind", ["independent", "proportional", "dependent"])
def test_surface_monotone_exactly(pair, kind):
    model = build_models(pair)[kind]
    s = price_surface(model, BOND, np.arange(0.5, 10.5, 0.5), np.arange(0.5, 14.5, 0.5), n_sims=20_000, seed=7)
    assert np.all(np.diff(s.price, axis=0) >= 0)
    assert np.all(np.diff(s.price, axis=1) >= 0)


def test_surface_grid_validation():
    with pytest.raises(ValueError):
        price_surface(OK_TX["independent"], BOND, [3.0, 2.0], [1.0], n_sims=1000, seed=0)
    with pytest.raises(ValueError):
        price_surface(OK_TX["independent"], BOND, [], [1.0], n_sims=1000, seed=0)
    with pytest.raises(ValueError):
        price_surface(OK_TX["independent"], BOND, [1.0], [1.0], method="exact")


def test_model3_il_ky_error_negative_at_low_thresholds():
    model = IL_KY["dependent"]
    grid = np.arange(0.25, 3.01, 0.25)
    mc = price_surface(model, BOND, grid, grid, n_sims=100_000, seed=1)
    nrm = price_surface(model, BOND, grid, grid, "normal")
    err = relative_error(nrm, mc)
    assert err.min() < -0.15
    # along D1 = 0.5 the underestimate deepens as D2 falls
    row = err[1, :6]
    assert np.all(np.diff(row) > 0)
    assert row[0] < -0.3


def test_surface_csv_layout():
    s = price_surface(OK_TX["independent"], BOND, [2.0, 3.0], [4.0], n_sims=1000, seed=0)
    text = s.to_csv("seed=0")
    lines = text.splitlines()
    assert lines[0] == "# seed=0"
    assert lines[1] == ",".join(CSV_COLUMNS)
    assert len(lines) == 4
    d1, d2, price, se, trig = (float(v) for v in lines[2].split(","))
    assert (d1, d2) == (2.0, 4.0)
    assert price == s.price[0, 0] and trig == s.trigger_probability[0, 0]


# ---------------------------------------------------------------------------
# Wang sweeps
# ---------------------------------------------------------------------------


def test_wang_zero_is_bit_identical():
    for model in OK_TX.values():
        base = mc_price(model, BOND, 20_000, 9)
        (_, est), = wang_price_curve(model, BOND, [0.0], 20_000, 9)
        assert est == base
        assert distort_model(model, 0.0) is model


@pytest.mark.parametrize("kind", ["independent", "proportional", "dependent"])
def test_wang_strictly_decreasing_ok_tx(kind):
    curve = wang_price_curve(OK_TX[kind], BOND, [0, -0.25, -0.5, -0.75, -1], 20_000, 3)
    prices = [est.price for _, est in curve]
    assert all(a > b for a, b in zip(prices, prices[1:]))


def test_wang_ordering_il_ky():
    bond = BondSpec(2.0, 0.03, 0.0, 3.0, 3.0)
    lams = [0, -0.25, -0.5, -0.75, -1]
    curves = {k: [e.price for _, e in wang_price_curve(m, bond, lams, 20_000, 0)] for k, m in IL_KY.items()}
    for i in range(len(lams)):
        assert curves["proportional"][i] > curves["independent"][i] > curves["dependent"][i]


def test_wang_rejects_positive_lambda():
    with pytest.raises(ValueError):
        wang_price_curve(OK_TX["independent"], BOND, [0.5], 1000, 0)


def test_wang_distorts_every_severity():
    model = distort_model(OK_TX["dependent"], -0.5)
    assert all(sev.lam == -0.5 for sev in model.severities().values())
    assert model.rates() == OK_TX["dependent"].rates()
