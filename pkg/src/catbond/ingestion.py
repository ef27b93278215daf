"""Loss-record loading, CPI adjustment, event classification and dependence summaries.

Input files are UTF-8 CSV with the header
``event_id,date,region,loss_usd_billions,cpi_factor`` (extra columns are
ignored) and ISO-8601 dates.  An event that has records in both regions is
a common event; pairing is by ``event_id`` only.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import stats

from .distributions import DEFAULT_TRUNCATION, TruncatedSeverity
from .errors import DuplicateRegionRecord, EmptyDataset, InsufficientCommonEvents, MalformedRow, ZeroWindow
from .stochastic import PoissonIntensity, estimate_intensity, sample_correlated_pair, substream

REQUIRED_COLUMNS = ("event_id", "date", "region", "loss_usd_billions", "cpi_factor")
INTENSITY_KEYS = ("all1", "all2", "only1", "only2", "common")

# below this many common pairs the rank correlation is reported with a warning
MIN_PAIRS_RHO = 5


class FewCommonEventsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LossRecord:
    event_id: str
    date: dt.date
    region: str
    loss: float
    cpi_factor: float = 1.0

    def __post_init__(self):
        if not (self.loss > 0 and math.isfinite(self.loss)):
            raise ValueError(f"loss must be positive, got {self.loss}")
        if not (self.cpi_factor > 0 and math.isfinite(self.cpi_factor)):
            raise ValueError(f"cpi_factor must be positive, got {self.cpi_factor}")

    @property
    def adjusted(self) -> float:
        return self.loss * self.cpi_factor


def _parse_row(row: dict, line: int) -> LossRecord:
    event_id = (row.get("event_id") or "").strip()
    if not event_id:
        raise MalformedRow(line, "empty event_id")
    try:
        date = dt.date.fromisoformat((row.get("date") or "").strip())
    except ValueError:
        raise MalformedRow(line, f"date {row.get('date')!r} is not ISO-8601 (YYYY-MM-DD)") from None
    values = {}
    for col in ("loss_usd_billions", "cpi_factor"):
        raw = (row.get(col) or "").strip()
        try:
            values[col] = float(raw)
        except ValueError:
            raise MalformedRow(line, f"{col} {raw!r} is not a number") from None
        if not (values[col] > 0 and math.isfinite(values[col])):
            raise MalformedRow(line, f"{col} must be positive and finite, got {raw!r}")
    return LossRecord(event_id, date, (row.get("region") or "").strip(), values["loss_usd_billions"],
                      values["cpi_factor"])


def read_records(path) -> list[LossRecord]:
    """Parse every row of a loss file without filtering."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyDataset(f"{path} is empty")
        missing = [c for c in REQUIRED_COLUMNS if c not in [f.strip() for f in reader.fieldnames]]
        if missing:
            raise MalformedRow(1, f"header lacks columns {', '.join(missing)}")
        reader.fieldnames = [f.strip() for f in reader.fieldnames]
        # header is line 1; DictReader.line_num tracks physical lines
        return [_parse_row(row, reader.line_num) for row in reader]


def load_and_adjust(path, region1: str, region2: str, truncation: float = DEFAULT_TRUNCATION) -> list[LossRecord]:
    """Records of the two regions with CPI-adjusted losses of at least ``truncation``.

    Returned records carry the adjusted loss and a ``cpi_factor`` of 1, so
    downstream code never applies the adjustment twice.
    """
    keep = {region1, region2}
    out = []
    for rec in read_records(path):
        if rec.region not in keep:
            continue
        adjusted = rec.adjusted
        if adjusted < truncation:
            continue
        out.append(LossRecord(rec.event_id, rec.date, rec.region, adjusted, 1.0))
    if not out:
        raise EmptyDataset(f"no {region1}/{region2} losses at or above {truncation} in {path}")
    return out


@dataclass
class ClassifiedLosses:
    only_region1: list[float]
    only_region2: list[float]
    common_pairs: list[tuple[float, float]]
    window_years: float
    regions: tuple[str, str] = ("region1", "region2")

    def __post_init__(self):
        if not self.window_years > 0:
            raise ZeroWindow(f"window_years must be positive, got {self.window_years}")

    @property
    def common1(self) -> np.ndarray:
        return np.array([p[0] for p in self.common_pairs], dtype=float)

    @property
    def common2(self) -> np.ndarray:
        return np.array([p[1] for p in self.common_pairs], dtype=float)

    def samples(self) -> dict[str, np.ndarray]:
        """The seven loss classes used for severity fitting."""
        c1, c2 = self.common1, self.common2
        return {
            "all1": np.concatenate([np.asarray(self.only_region1, dtype=float), c1]),
            "all2": np.concatenate([np.asarray(self.only_region2, dtype=float), c2]),
            "only1": np.asarray(self.only_region1, dtype=float),
            "only2": np.asarray(self.only_region2, dtype=float),
            "total_common": c1 + c2,
            "common1": c1,
            "common2": c2,
        }

    def counts(self) -> dict[str, int]:
        n1, n2, nc = len(self.only_region1), len(self.only_region2), len(self.common_pairs)
        return {"all1": n1 + nc, "all2": n2 + nc, "only1": n1, "only2": n2, "common": nc}

    def swapped(self) -> "ClassifiedLosses":
        return ClassifiedLosses(
            list(self.only_region2),
            list(self.only_region1),
            [(b, a) for a, b in self.common_pairs],
            self.window_years,
            (self.regions[1], self.regions[0]),
        )


def classify_events(records, region1: str, region2: str, window_years: float) -> ClassifiedLosses:
    """Split records into region-only losses and common ``(region1, region2)`` pairs."""
    if not window_years > 0:
        raise ZeroWindow(f"window_years must be positive, got {window_years}")
    by_event: dict[str, dict[str, float]] = {}
    order: list[str] = []
    for rec in records:
        if rec.region not in (region1, region2):
            continue
        slot = by_event.setdefault(rec.event_id, {})
        if not slot:
            order.append(rec.event_id)
        if rec.region in slot:
            raise DuplicateRegionRecord(f"event {rec.event_id!r} has two {rec.region} records")
        slot[rec.region] = rec.adjusted
    only1, only2, common = [], [], []
    for eid in order:
        slot = by_event[eid]
        if region1 in slot and region2 in slot:
            common.append((slot[region1], slot[region2]))
        elif region1 in slot:
            only1.append(slot[region1])
        else:
            only2.append(slot[region2])
    return ClassifiedLosses(only1, only2, common, float(window_years), (region1, region2))


@dataclass(frozen=True)
class DependenceSummary:
    mean_share_p: float
    spearman_rho: float
    intensities: dict[str, PoissonIntensity] = field(default_factory=dict)
    n_common: int = 0

    def to_dict(self) -> dict:
        return {
            "mean_share_p": self.mean_share_p,
            "spearman_rho": self.spearman_rho,
            "intensities": {k: v.rate for k, v in self.intensities.items()},
            "n_common": self.n_common,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DependenceSummary":
        return cls(
            float(doc["mean_share_p"]),
            float(doc["spearman_rho"]),
            {k: PoissonIntensity(float(v)) for k, v in doc["intensities"].items()},
            int(doc.get("n_common", 0)),
        )


def mean_share(pairs) -> float:
    """Average region-1 share ``x / (x + y)``, summed in exact rational arithmetic.

    Exactness makes the two orientations add up to one.
    """
    if len(pairs) == 0:
        raise InsufficientCommonEvents("no common events to estimate the loss share")
    total = sum((Fraction(x) / (Fraction(x) + Fraction(y)) for x, y in pairs), Fraction(0))
    return float(total / len(pairs))


def intensities(classified: ClassifiedLosses) -> dict[str, PoissonIntensity]:
    counts = classified.counts()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return {k: estimate_intensity(counts[k], classified.window_years) for k in INTENSITY_KEYS}


def summarize_dependence(classified: ClassifiedLosses) -> DependenceSummary:
    """Loss share ``p``, Spearman correlation of common pairs and the five intensities.

    Raises ``InsufficientCommonEvents`` with fewer than three common pairs or
    when either coordinate is constant (rank correlation undefined), and
    warns with fewer than five.
    """
    pairs = classified.common_pairs
    n = len(pairs)
    if n < 3:
        raise InsufficientCommonEvents(f"need at least 3 common events, got {n}")
    x, y = classified.common1, classified.common2
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise InsufficientCommonEvents("common losses have constant ranks; Spearman correlation undefined")
    if n < MIN_PAIRS_RHO:
        warnings.warn(f"Spearman correlation from only {n} common events", FewCommonEventsWarning, stacklevel=2)
    rho = float(stats.spearmanr(x, y).statistic)
    return DependenceSummary(mean_share(pairs), rho, intensities(classified), n)


# ---------------------------------------------------------------------------
# Synthetic fixtures
# ---------------------------------------------------------------------------


def generate_fixture(
    preset: dict,
    window_years: float = 29.4,
    seed=0,
    counts: dict | None = None,
    truncation: float = DEFAULT_TRUNCATION,
    start: dt.date = dt.date(1990, 1, 1),
    inflation: float = 0.03,
) -> list[LossRecord]:
    """Loss records drawn from a preset's fitted severities.

    Region-only events come from the ``only1``/``only2`` severities and
    common events from the ``common1``/``common2`` marginals joined by the
    preset's Gaussian copula.  Event counts default to the preset's observed
    counts.  Nominal losses are deflated by ``(1 + inflation)`` per year
    before the window end so the CPI factors are not all one.
    """
    reg1, reg2 = preset["regions"]
    c = dict(preset["counts"]) if counts is None else dict(counts)
    n_common = int(c["common"])
    n1 = int(c.get("only1", c.get("all1", 0) - n_common))
    n2 = int(c.get("only2", c.get("all2", 0) - n_common))
    if min(n1, n2, n_common) < 0:
        raise ValueError("event counts must be non-negative")
    sev = {k: TruncatedSeverity(f, truncation) for k, f in preset["severity"].items()}

    only1 = sev["only1"].sample(substream(seed, 0), n1)
    only2 = sev["only2"].sample(substream(seed, 1), n2)
    c1, c2 = sample_correlated_pair(sev["common1"], sev["common2"], preset["spearman_rho"], substream(seed, 2),
                                    n_common)
    span = int(window_years * 365.25)
    total = n1 + n2 + n_common
    days = np.sort(substream(seed, 3).integers(0, span, total))
    kinds = np.array([0] * n1 + [1] * n2 + [2] * n_common)
    substream(seed, 4).shuffle(kinds)

    out = []
    it1, it2, itc = iter(only1), iter(only2), iter(zip(c1, c2))
    for k, (kind, day) in enumerate(zip(kinds, days)):
        date = start + dt.timedelta(days=int(day))
        cpi = float((1.0 + inflation) ** ((span - day) / 365.25))
        eid = f"E{k + 1:05d}"
        if kind == 0:
            out.append(LossRecord(eid, date, reg1, float(next(it1)) / cpi, cpi))
        elif kind == 1:
            out.append(LossRecord(eid, date, reg2, float(next(it2)) / cpi, cpi))
        else:
            a, b = next(itc)
            out.append(LossRecord(eid, date, reg1, float(a) / cpi, cpi))
            out.append(LossRecord(eid, date, reg2, float(b) / cpi, cpi))
    return out


def write_records(records, path) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REQUIRED_COLUMNS)
        for rec in records:
            writer.writerow([rec.event_id, rec.date.isoformat(), rec.region, repr(rec.loss), repr(rec.cpi_factor)])
