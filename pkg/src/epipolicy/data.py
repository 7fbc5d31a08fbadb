"""Loading the three data sources from local CSV snapshots and bundling them.

Input schemas (header names are matched exactly):

* stringency (OWID subset): ``iso_code, location, date, stringency_index``
* compartments (Worldometer snapshot): ``date, total_cases, total_recovered``
  and optionally ``total_deaths``
* quarterly GDP (OECD indicator): ``LOCATION, TIME, Value`` with ``TIME``
  like ``2020-Q2``

Extra columns are ignored. Dates are ISO ``YYYY-MM-DD``.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .calibration import ObservedSeries
from .econ import DailyGdpSeries, parse_quarter, quarterly_to_daily
from .errors import CoverageError, DataError, DataLookupError, ParseError
from .model import StringencySeries

log = logging.getLogger(__name__)

BUNDLE_FORMAT = "epipolicy-bundle"
BUNDLE_VERSION = 1
DEFAULT_START = dt.date(2020, 5, 1)
# 915 daily values (914 transitions); the inclusive May 2020 - Oct 2022 span has 914.
DEFAULT_END = dt.date(2022, 11, 1)
DEFAULT_POPULATION = {"IND": 1.38e9}
MAX_INTERP_GAP = 3


def bundled_data_dir():
    """Directory holding the synthetic surrogate CSVs shipped with the package."""
    return Path(str(resources.files("epipolicy") / "data"))


def _read_rows(path, required):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise ParseError(f"{path}: missing header column(s) {', '.join(missing)}")
        return list(reader)


def _parse_date(text, path):
    try:
        return dt.date.fromisoformat(text.strip())
    except (AttributeError, ValueError) as exc:
        raise ParseError(f"{path}: bad date {text!r}") from exc


def _parse_float(text, path, column):
    if text is None or text.strip() == "":
        return math.nan
    try:
        return float(text)
    except ValueError as exc:
        raise ParseError(f"{path}: bad number {text!r} in column {column}") from exc


def _date_grid(start, end):
    if end < start:
        raise CoverageError(f"empty date range {start} .. {end}")
    return [start + dt.timedelta(days=k) for k in range((end - start).days + 1)]


def load_stringency_csv(path, country, date_range=(DEFAULT_START, DEFAULT_END)):
    """Daily stringency for one country over an inclusive date range.

    ``country`` matches either ``iso_code`` or ``location``. Interior and
    trailing gaps are forward-filled; leading gaps take the first value.
    """
    rows = _read_rows(path, ("iso_code", "location", "date", "stringency_index"))
    mine = [r for r in rows if country in (r["iso_code"], r["location"])]
    if not mine:
        raise DataLookupError(f"{path}: country {country!r} not found")
    start, end = date_range
    by_date = {}
    for r in mine:
        v = _parse_float(r["stringency_index"], path, "stringency_index")
        if not math.isnan(v):
            by_date[_parse_date(r["date"], path)] = v
    grid = _date_grid(start, end)
    values = [by_date.get(d, math.nan) for d in grid]
    observed = [v for v in values if not math.isnan(v)]
    if not observed:
        raise CoverageError(f"{path}: no stringency for {country} in {start} .. {end}")
    prev = observed[0]
    filled = 0
    for k, v in enumerate(values):
        if math.isnan(v):
            values[k] = prev
            filled += 1
        else:
            prev = v
    if filled:
        log.info("stringency %s: filled %d missing day(s)", country, filled)
    return StringencySeries(start, np.array(values))


def _interpolate_gaps(values, path, column):
    arr = np.asarray(values, dtype=np.float64)
    bad = np.isnan(arr)
    if not bad.any():
        return arr
    if bad[0] or bad[-1]:
        raise CoverageError(f"{path}: {column} missing at the range boundary")
    k = 0
    while k < arr.size:
        if bad[k]:
            j = k
            while bad[j]:
                j += 1
            if j - k > MAX_INTERP_GAP:
                raise CoverageError(f"{path}: {column} gap of {j - k} days exceeds {MAX_INTERP_GAP}")
            k = j
        k += 1
    idx = np.arange(arr.size)
    arr[bad] = np.interp(idx[bad], idx[~bad], arr[~bad])
    return arr


def load_compartments_csv(path, population, date_range=(DEFAULT_START, DEFAULT_END), deaths="ignore"):
    """Observed S, I, R from cumulative totals.

    ``I = total - recovered`` and ``R = recovered``; ``S = N - I - R``. With
    ``deaths="removed"`` a ``total_deaths`` column is subtracted from I and
    counted in R. Gaps of up to three days are linearly interpolated.
    Negative derived values are clipped to zero with a warning.
    """
    if population <= 0:
        raise DataError("population must be positive")
    rows = _read_rows(path, ("date", "total_cases", "total_recovered"))
    if not rows:
        raise CoverageError(f"{path}: no data rows")
    use_deaths = deaths == "removed"
    if use_deaths and "total_deaths" not in rows[0]:
        raise ParseError(f"{path}: missing header column(s) total_deaths")
    start, end = date_range
    table = {}
    for r in rows:
        d = _parse_date(r["date"], path)
        if start <= d <= end:
            table[d] = (
                _parse_float(r["total_cases"], path, "total_cases"),
                _parse_float(r["total_recovered"], path, "total_recovered"),
                _parse_float(r["total_deaths"], path, "total_deaths") if use_deaths else 0.0,
            )
    if not table:
        raise CoverageError(f"{path}: no compartment data in {start} .. {end}")
    grid = _date_grid(start, end)
    cols = list(zip(*(table.get(d, (math.nan, math.nan, math.nan)) for d in grid)))
    total = _interpolate_gaps(cols[0], path, "total_cases")
    recovered = _interpolate_gaps(cols[1], path, "total_recovered")
    dead = _interpolate_gaps(cols[2], path, "total_deaths")

    drops = int(np.sum(np.diff(total) < 0))
    if drops:
        log.warning("%s: cumulative total_cases decreases on %d day(s); values kept", path, drops)

    i = total - recovered - dead
    r = recovered + dead
    clipped = int(np.sum(i < 0) + np.sum(r < 0))
    if clipped:
        log.warning("%s: clipped %d negative derived value(s) to 0", path, clipped)
    i = np.clip(i, 0.0, None)
    r = np.clip(r, 0.0, None)
    s = population - i - r
    if s.min() < 0:
        raise DataError(f"{path}: infected + recovered exceed the population")
    return ObservedSeries(start, s, i, r, float(population))


def load_gdp_csv(path, country):
    """Chronological ``[(quarter_label, value), ...]`` for one country."""
    rows = _read_rows(path, ("LOCATION", "TIME", "Value"))
    mine = [r for r in rows if r["LOCATION"] == country]
    if not mine:
        raise DataLookupError(f"{path}: country {country!r} not found")
    seen = {}
    for r in mine:
        try:
            key = parse_quarter(r["TIME"])
        except ValueError as exc:
            raise ParseError(f"{path}: bad quarter {r['TIME']!r}") from exc
        if key in seen:
            raise DataError(f"{path}: duplicate quarter {r['TIME']} for {country}")
        seen[key] = _parse_float(r["Value"], path, "Value")
    return [(f"{y}-Q{q}", seen[(y, q)]) for y, q in sorted(seen)]


@dataclass(frozen=True)
class DatasetBundle:
    country: str
    observed: ObservedSeries
    stringency: StringencySeries
    gdp_daily: DailyGdpSeries
    gdp_quarterly: tuple
    population: float
    date_range: tuple

    def __post_init__(self):
        n = (self.date_range[1] - self.date_range[0]).days + 1
        if self.population <= 0:
            raise DataError("population must be positive")
        if not (len(self.observed) == len(self.stringency) == len(self.gdp_daily) == n):
            raise DataError("bundle series do not share the daily grid")
        starts = {self.observed.start_date, self.stringency.start_date, self.gdp_daily.start_date}
        if starts != {self.date_range[0]}:
            raise DataError("bundle series start on different dates")

    @property
    def days(self):
        return len(self.observed)

    @property
    def horizon(self):
        return self.days - 1

    def proportions(self):
        """(S, I, R) / N as an array of shape (days, 3)."""
        o = self.observed
        return np.column_stack([o.s_obs, o.i_obs, o.r_obs]) / self.population

    def to_dict(self):
        o = self.observed
        return {
            "format": BUNDLE_FORMAT,
            "version": BUNDLE_VERSION,
            "country": self.country,
            "population": self.population,
            "start_date": self.date_range[0].isoformat(),
            "end_date": self.date_range[1].isoformat(),
            "s": o.s_obs.tolist(),
            "i": o.i_obs.tolist(),
            "r": o.r_obs.tolist(),
            "stringency": self.stringency.values.tolist(),
            "gdp_daily": self.gdp_daily.values.tolist(),
            "gdp_quarterly": [list(q) for q in self.gdp_quarterly],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != BUNDLE_FORMAT:
            raise ParseError("not an epipolicy bundle")
        if d.get("version") != BUNDLE_VERSION:
            raise ParseError(f"unsupported bundle version {d.get('version')}")
        start = dt.date.fromisoformat(d["start_date"])
        end = dt.date.fromisoformat(d["end_date"])
        n = float(d["population"])
        return cls(
            d["country"],
            ObservedSeries(start, np.array(d["s"]), np.array(d["i"]), np.array(d["r"]), n),
            StringencySeries(start, np.array(d["stringency"])),
            DailyGdpSeries(start, np.array(d["gdp_daily"])),
            tuple((q, float(v)) for q, v in d["gdp_quarterly"]),
            n,
            (start, end),
        )


def build_bundle(
    stringency_csv,
    compartments_csv,
    gdp_csv,
    country="IND",
    population=None,
    date_range=(DEFAULT_START, DEFAULT_END),
    gdp_repeat=False,
    deaths="ignore",
):
    """Load all three sources and align them on one daily grid."""
    if population is None:
        try:
            population = DEFAULT_POPULATION[country]
        except KeyError:
            raise DataError(f"no default population for {country!r}; pass one explicitly") from None
    stringency = load_stringency_csv(stringency_csv, country, date_range)
    observed = load_compartments_csv(compartments_csv, population, date_range, deaths)
    quarters = load_gdp_csv(gdp_csv, country)
    gdp = quarterly_to_daily(quarters, date_range[0], date_range[1], repeat=gdp_repeat)
    return DatasetBundle(country, observed, stringency, gdp, tuple(quarters), float(population), tuple(date_range))


def default_bundle():
    """Bundle built from the packaged synthetic surrogate CSVs (India surrogate)."""
    d = bundled_data_dir()
    return build_bundle(
        d / "owid_stringency_subset.csv",
        d / "worldometer_ind.csv",
        d / "oecd_gdp_quarterly.csv",
    )


def save_bundle(bundle, path):
    text = json.dumps(bundle.to_dict(), indent=None, sort_keys=True)
    Path(path).write_text(text + "\n")


def load_bundle(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    return DatasetBundle.from_dict(d)
