import datetime as dt
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catbond.errors import DuplicateRegionRecord, EmptyDataset, InsufficientCommonEvents, MalformedRow, ZeroWindow
from catbond.ingestion import (
    ClassifiedLosses,
    DependenceSummary,
    FewCommonEventsWarning,
    LossRecord,
    classify_events,
    generate_fixture,
    load_and_adjust,
    mean_share,
    read_records,
    summarize_dependence,
    write_records,
)
from catbond.presets import IL_KY, OK_TX

DATA = Path(__file__).resolve().parents[1] / "data"
HEADER = "event_id,date,region,loss_usd_billions,cpi_factor\n"
DAY = dt.date(2000, 1, 1)


def write_csv(tmp_path, body, header=HEADER):
    path = tmp_path / "losses.csv"
    path.write_text(header + body)
    return path


def rec(eid, region, loss):
    return LossRecord(eid, DAY, region, loss, 1.0)


def synthetic_records(n_only1, n_only2, n_common, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    k = 0
    for _ in range(n_only1):
        k += 1
        out.append(rec(f"e{k}", "OK", float(rng.uniform(0.03, 1))))
    for _ in range(n_only2):
        k += 1
        out.append(rec(f"e{k}", "TX", float(rng.uniform(0.03, 1))))
    for _ in range(n_common):
        k += 1
        out.append(rec(f"e{k}", "OK", float(rng.uniform(0.03, 1))))
        out.append(rec(f"e{k}", "TX", float(rng.uniform(0.03, 1))))
    rng.shuffle(out)
    return out


# ---------------------------------------------------------------------------
# loading and CPI adjustment
# ---------------------------------------------------------------------------


def test_cpi_adjustment_then_truncation(tmp_path):
    path = write_csv(tmp_path, "a,2001-05-03,OK,0.020,2.0\nb,2001-06-01,OK,0.020,1.0\n")
    out = load_and_adjust(path, "OK", "TX", 0.025)
    assert len(out) == 1
    assert out[0].event_id == "a"
    assert out[0].loss == pytest.approx(0.040)
    assert out[0].cpi_factor == 1.0


def test_threshold_is_inclusive(tmp_path):
    path = write_csv(tmp_path, "a,2001-05-03,OK,0.025,1.0\n")
    assert len(load_and_adjust(path, "OK", "TX", 0.025)) == 1


def test_other_regions_dropped(tmp_path):
    path = write_csv(tmp_path, "a,2001-05-03,OK,0.5,1.0\nb,2001-05-03,KS,0.5,1.0\n")
    assert [r.region for r in load_and_adjust(path, "OK", "TX")] == ["OK"]


def test_non_numeric_loss_names_line(tmp_path):
    path = write_csv(tmp_path, "a,2001-05-03,OK,0.5,1.0\nb,2001-05-04,TX,n/a,1.0\n")
    with pytest.raises(MalformedRow) as info:
        load_and_adjust(path, "OK", "TX")
    assert info.value.line == 3
    assert "line 3" in str(info.value)


@pytest.mark.parametrize("row", [
    "a,05/03/2001,OK,0.5,1.0\n",
    "a,2001-05-03,OK,-0.5,1.0\n",
    "a,2001-05-03,OK,0.5,0\n",
    "a,2001-05-03,OK,inf,1.0\n",
    ",2001-05-03,OK,0.5,1.0\n",
])
def test_malformed_rows(tmp_path, row):
    with pytest.raises(MalformedRow):
        read_records(write_csv(tmp_path, row))


def test_missing_column_is_malformed(tmp_path):
    path = write_csv(tmp_path, "a,2001-05-03,OK,0.5\n", header="event_id,date,region,loss_usd_billions\n")
    with pytest.raises(MalformedRow):
        read_records(path)


def test_empty_inputs(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(EmptyDataset):
        load_and_adjust(empty, "OK", "TX")
    with pytest.raises(EmptyDataset):
        load_and_adjust(write_csv(tmp_path, ""), "OK", "TX")
    with pytest.raises(EmptyDataset):
        load_and_adjust(write_csv(tmp_path, "a,2001-05-03,OK,0.001,1.0\n"), "OK", "TX")


def test_record_validation():
    with pytest.raises(ValueError):
        LossRecord("a", DAY, "OK", 0.0)
    with pytest.raises(ValueError):
        LossRecord("a", DAY, "OK", 1.0, -1.0)


def test_write_read_round_trip(tmp_path):
    records = generate_fixture(OK_TX, seed=3)
    path = tmp_path / "fixture.csv"
    write_records(records, path)
    assert read_records(path) == records


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


def test_published_counts():
    records = synthetic_records(41, 119, 44)
    c = classify_events(records, "OK", "TX", 29.4)
    assert len(c.only_region1) == 41
    assert len(c.only_region2) == 119
    assert len(c.common_pairs) == 44
    assert c.counts() == {"all1": 85, "all2": 163, "only1": 41, "only2": 119, "common": 44}


def test_single_region_event_lands_in_only_list():
    c = classify_events([rec("a", "TX", 0.3)], "OK", "TX", 1.0)
    assert c.only_region2 == [0.3] and c.only_region1 == [] and c.common_pairs == []


def test_common_pair_orientation():
    c = classify_events([rec("a", "TX", 0.3), rec("a", "OK", 0.1)], "OK", "TX", 1.0)
    assert c.common_pairs == [(0.1, 0.3)]
    assert c.swapped().common_pairs == [(0.3, 0.1)]
    assert c.swapped().regions == ("TX", "OK")


def test_duplicate_region_record():
    with pytest.raises(DuplicateRegionRecord):
        classify_events([rec("a", "OK", 0.3), rec("a", "OK", 0.4)], "OK", "TX", 1.0)


def test_zero_window():
    with pytest.raises(ZeroWindow):
        classify_events([rec("a", "OK", 0.3)], "OK", "TX", 0.0)


def test_no_shared_ids_is_insufficient_downstream():
    c = classify_events(synthetic_records(5, 5, 0), "OK", "TX", 3.0)
    assert c.common_pairs == []
    with pytest.raises(InsufficientCommonEvents):
        summarize_dependence(c)
    with pytest.raises(InsufficientCommonEvents):
        mean_share(c.common_pairs)


def test_samples_classes():
    c = classify_events(synthetic_records(4, 6, 3, seed=2), "OK", "TX", 2.0)
    s = c.samples()
    assert s["all1"].size == 7 and s["all2"].size == 9
    np.testing.assert_array_equal(s["total_common"], s["common1"] + s["common2"])


@settings(max_examples=60, deadline=None)
@given(n1=st.integers(0, 20), n2=st.integers(0, 20), nc=st.integers(0, 20), seed=st.integers(0, 1000))
def test_property_partition(n1, n2, nc, seed):
    records = synthetic_records(n1, n2, nc, seed)
    c = classify_events(records, "OK", "TX", 1.0)
    assert len(c.only_region1) + len(c.only_region2) + 2 * len(c.common_pairs) == len(records)
    ids = {r.event_id for r in records}
    assert len(c.only_region1) + len(c.only_region2) + len(c.common_pairs) == len(ids)


# ---------------------------------------------------------------------------
# dependence summaries
# ---------------------------------------------------------------------------


def test_comonotone_pairs():
    c = ClassifiedLosses([], [], [(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)], 1.0)
    with pytest.warns(FewCommonEventsWarning):
        s = summarize_dependence(c)
    assert s.spearman_rho == pytest.approx(1.0, abs=1e-15)
    assert s.mean_share_p == pytest.approx(1 / 3, abs=1e-15)


def test_constant_pairs_are_insufficient():
    c = ClassifiedLosses([], [], [(0.5, 0.5)] * 6, 1.0)
    with pytest.raises(InsufficientCommonEvents):
        summarize_dependence(c)


def test_fewer_than_three_pairs():
    c = ClassifiedLosses([], [], [(0.1, 0.2), (0.3, 0.1)], 1.0)
    with pytest.raises(InsufficientCommonEvents):
        summarize_dependence(c)


def test_intensities_are_counts_over_window():
    c = classify_events(synthetic_records(41, 119, 44), "OK", "TX", 29.4)
    s = summarize_dependence(c)
    assert s.intensities["all1"].rate == 85 / 29.4
    assert s.intensities["all2"].rate == 163 / 29.4
    assert s.intensities["common"].rate == 44 / 29.4
    doubled = summarize_dependence(classify_events(synthetic_records(41, 119, 44), "OK", "TX", 58.8))
    for k in s.intensities:
        assert doubled.intensities[k].rate == pytest.approx(s.intensities[k].rate / 2, rel=1e-15)


def test_summary_round_trip():
    c = classify_events(synthetic_records(3, 4, 8), "OK", "TX", 5.0)
    s = summarize_dependence(c)
    assert DependenceSummary.from_dict(s.to_dict()) == s


def test_mean_share_is_exact():
    pairs = [(0.1, 0.2), (0.7, 0.3), (1e-3, 5.0)]
    exact = sum(Fraction(x) / (Fraction(x) + Fraction(y)) for x, y in pairs) / 3
    assert mean_share(pairs) == float(exact)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.025, 1e3), st.floats(0.025, 1e3)), min_size=1, max_size=40))
def test_property_share_symmetry(pairs):
    p = mean_share(pairs)
    q = mean_share([(b, a) for a, b in pairs])
    assert 0 < p < 1
    assert p + q == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0.025, 1e3), st.floats(0.025, 1e3)), min_size=5, max_size=40, unique=True))
def test_property_swapping_regions_keeps_rho(pairs):
    c = ClassifiedLosses([], [], pairs, 1.0)
    try:
        s = summarize_dependence(c)
    except InsufficientCommonEvents:
        return
    t = summarize_dependence(c.swapped())
    assert t.spearman_rho == pytest.approx(s.spearman_rho, abs=1e-12)


# ---------------------------------------------------------------------------
# shipped fixtures
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name, preset, w", [
    ("ok_tx_losses.csv", OK_TX, 29.4),
    ("il_ky_losses.csv", IL_KY, 29.4),
    ("ok_tx_losses_x10.csv", OK_TX, 294.0),
])
def test_fixture_counts(name, preset, w):
    r1, r2 = preset["regions"]
    c = classify_events(load_and_adjust(DATA / name, r1, r2), r1, r2, w)
    scale = 10 if "x10" in name else 1
    counts = c.counts()
    for k, v in preset["counts"].items():
        assert counts[k] == scale * v
    records = read_records(DATA / name)
    assert any(r.cpi_factor != 1.0 for r in records)


def test_fixture_recovers_generation_targets():
    c = classify_events(load_and_adjust(DATA / "ok_tx_losses_x10.csv", "OK", "TX"), "OK", "TX", 294.0)
    s = summarize_dependence(c)
    assert abs(s.mean_share_p - OK_TX["p"]) <= 0.05
    assert abs(s.spearman_rho - OK_TX["spearman_rho"]) <= 0.1


def test_fixture_is_reproducible():
    assert generate_fixture(OK_TX, seed=5) == generate_fixture(OK_TX, seed=5)
    assert generate_fixture(OK_TX, seed=5) != generate_fixture(OK_TX, seed=6)


def test_fixture_losses_above_truncation_after_adjustment():
    records = generate_fixture(IL_KY, seed=1)
    assert min(r.adjusted for r in records) >= 0.025
    assert all(math.isfinite(r.loss) for r in records)
