"""
Parsers for the external data products: county case counts, county centroids, closing prices,
search-trend volumes and aggregate Covid counts.

All inputs are UTF-8, comma-delimited CSV files with a header row; dates are ISO-8601 days only.
Writers for the same formats live here too, so that parsed records can be serialized back.
"""

from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pandas.errors import EmptyDataError, ParserError

from .logger import RunLogger
from .timeseries import CalendarKind, DailySeries
from .utils.data_objects import write_table

PathLike = Union[str, Path]

CASES_COLUMNS = ("date", "county", "state", "fips", "cases", "deaths")
PRICE_COLUMNS = ("date", "close")
TRENDS_COLUMNS = ("date", "query", "value")
TOTALS_COLUMNS = ("date", "variable", "value")
GEO_COLUMNS = ("fips", "name", "state", "lat", "lon")

#: the eight aggregate Covid variables, in table order
COVID_VARIABLES = (
    "us_total_cases",
    "us_new_cases",
    "us_total_deaths",
    "us_new_deaths",
    "world_total_cases",
    "world_new_cases",
    "world_total_deaths",
    "world_new_deaths",
)


class IngestError(ValueError):
    """Base class of the errors raised while reading input files."""


class MalformedRow(IngestError):
    """A data row cannot be parsed. ``line`` is the 1-based line number in the file (header is line 1)."""

    def __init__(self, path: PathLike, line: int, reason: str):
        self.path = Path(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path.name}, line {line}: {reason}")


class EmptyFile(IngestError):
    """The file has no header or no data rows."""


class DuplicateDate(IngestError):
    """The same date appears twice for one series."""


class DuplicateFips(IngestError):
    """The same county identifier appears twice in the centroid table."""


@dataclass(frozen=True)
class CountyDay:
    """
    Cumulative counts of one county on one day.

    - ``fips``: 5-digit county identifier (zero padded)
    - ``cumulative_cases`` / ``cumulative_deaths``: non-negative, non-decreasing per county after repair
    - ``county`` / ``state``: names as given in the file, kept for serialization
    """

    date: date
    fips: str
    cumulative_cases: int
    cumulative_deaths: int
    county: str = ""
    state: str = ""


@dataclass(frozen=True)
class CountyGeo:
    """A county centroid in degrees."""

    fips: str
    latitude: float
    longitude: float
    name: str = ""
    state: str = ""

    def __post_init__(self):
        """Check the coordinate ranges."""
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"Latitude {self.latitude} of county {self.fips} is out of [-90, 90].")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"Longitude {self.longitude} of county {self.fips} is out of [-180, 180].")


@dataclass(frozen=True)
class CountyCases:
    """
    The parsed case file.

    - ``records``: repaired records sorted by (fips, date)
    - ``dropped``: rows without a county identifier
    - ``repaired``: rows whose cumulative counts were raised to the running maximum
    """

    records: List[CountyDay]
    dropped: int = 0
    repaired: int = 0

    def __len__(self) -> int:
        """Number of kept records."""
        return len(self.records)


def _read_frame(path: PathLike, columns: Sequence[str]) -> pd.DataFrame:
    """
    Read every column as text and check the header.

    Blank lines are dropped after reading; the index of the returned frame is the file line number minus two.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8")
    except EmptyDataError as exc:
        raise EmptyFile(f"{path} is empty.") from exc
    except ParserError as exc:
        raise MalformedRow(path, 0, f"CSV structure error ({exc})") from exc
    df.columns = [c.strip() for c in df.columns]
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise MalformedRow(path, 1, f"header is missing column(s) {', '.join(missing)}")
    df = df[list(columns)].fillna("").apply(lambda column: column.str.strip())
    df = df[(df != "").any(axis=1)]
    if df.empty:
        raise EmptyFile(f"{path} has a header but no data rows.")
    return df


def _first_bad(path: PathLike, bad: pd.Series, reason: str):
    if bad.any():
        raise MalformedRow(path, int(bad[bad].index[0]) + 2, reason)


def _parse_dates(path: PathLike, column: pd.Series) -> pd.Series:
    parsed = pd.to_datetime(column, format="%Y-%m-%d", errors="coerce")
    _first_bad(path, parsed.isna() | (column.str.len() != 10), "date is not an ISO-8601 day")
    return parsed


def _parse_floats(path: PathLike, column: pd.Series, what: str) -> pd.Series:
    parsed = pd.to_numeric(column, errors="coerce")
    _first_bad(path, ~np.isfinite(parsed.astype(float)), f"{what} is not a finite number")
    return parsed.astype(float)


def _parse_counts(path: PathLike, column: pd.Series, what: str) -> pd.Series:
    parsed = _parse_floats(path, column, what)
    _first_bad(path, (parsed < 0) | (parsed != np.floor(parsed)), f"{what} is not a non-negative integer")
    return parsed.astype(np.int64)


def read_county_cases(path: PathLike, logger: Optional[RunLogger] = None) -> CountyCases:
    """
    Read a county case file with header ``date,county,state,fips,cases,deaths``.

    Rows with an empty ``fips`` (unknown county, city aggregates) are dropped and counted. Cumulative
    counts that decrease for a county are repaired to the running maximum; each repair is logged.

    Raises
    ------
    EmptyFile
        The file has no data rows.
    MalformedRow
        A row has a bad date, identifier or count (``line`` is set).
    DuplicateDate
        A county has two rows on the same date.
    """
    df = _read_frame(path, CASES_COLUMNS)
    has_fips = df["fips"] != ""
    dropped = int((~has_fips).sum())
    if dropped and logger is not None:
        logger.log_repair("dropped_rows_without_fips", file=str(path), count=dropped)

    _first_bad(path, has_fips & ~df["fips"].str.fullmatch(r"\d{1,5}"), "fips is not a county identifier")
    df = df[has_fips].copy()
    if df.empty:
        raise EmptyFile(f"{path} has no rows with a county identifier.")
    dates = _parse_dates(path, df["date"])
    cases = _parse_counts(path, df["cases"], "cases")
    deaths = _parse_counts(path, df["deaths"].replace("", "0"), "deaths")

    table = pd.DataFrame(
        {
            "date": dates.dt.date,
            "fips": df["fips"].str.zfill(5),
            "cases": cases,
            "deaths": deaths,
            "county": df["county"],
            "state": df["state"],
        }
    ).sort_values(["fips", "date"], kind="mergesort")
    duplicated = table.duplicated(["fips", "date"])
    if duplicated.any():
        row = table[duplicated].iloc[0]
        raise DuplicateDate(f"County {row['fips']} has more than one row on {row['date']}.")

    repaired_cases = table.groupby("fips")["cases"].cummax()
    repaired_deaths = table.groupby("fips")["deaths"].cummax()
    changed = (repaired_cases != table["cases"]) | (repaired_deaths != table["deaths"])
    repaired = int(changed.sum())
    if repaired and logger is not None:
        logger.log_repair(
            "monotone_cumulative_counts",
            file=str(path),
            count=repaired,
            rows=[
                {"fips": f, "date": d}
                for f, d in zip(table.loc[changed, "fips"], table.loc[changed, "date"])
            ],
        )
    table["cases"] = repaired_cases
    table["deaths"] = repaired_deaths

    records = [
        CountyDay(
            date=row.date,
            fips=row.fips,
            cumulative_cases=int(row.cases),
            cumulative_deaths=int(row.deaths),
            county=row.county,
            state=row.state,
        )
        for row in table.itertuples(index=False)
    ]
    return CountyCases(records=records, dropped=dropped, repaired=repaired)


def _records_frame(records: Iterable[CountyDay]) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.date, r.fips, r.cumulative_cases, r.cumulative_deaths) for r in records],
        columns=["date", "fips", "cases", "deaths"],
    )


def daily_increments(records: Iterable[CountyDay], field: str = "cases") -> Dict[str, DailySeries]:
    """
    Per-county first differences of a cumulative count (``"cases"`` or ``"deaths"``).

    The first observed day of a county keeps its cumulative count. Records are expected to be
    monotone-repaired, so every increment is non-negative.
    """
    table = _records_frame(records).sort_values(["fips", "date"], kind="mergesort")
    result = {}
    for fips, group in table.groupby("fips", sort=True):
        cumulative = group[field].to_numpy(dtype=float)
        increments = np.diff(cumulative, prepend=0.0)
        if np.any(increments < 0):
            raise IngestError(f"County {fips} has decreasing cumulative {field}; repair the records first.")
        result[fips] = DailySeries(group["date"].tolist(), increments, CalendarKind.CALENDAR, fips)
    return result


def new_cases(records: Iterable[CountyDay]) -> Dict[str, DailySeries]:
    """Per-county daily new cases (first differences of the cumulative counts)."""
    return daily_increments(records, "cases")


def cases_on(records: Iterable[CountyDay], day: date, basis: str = "new") -> Dict[str, int]:
    """
    Map fips -> count on ``day``, either daily new cases (``basis="new"``) or cumulative cases.

    Counties without a record on that day are absent from the map.
    """
    if basis not in ("new", "cumulative"):
        raise ValueError(f"Unknown case basis {basis!r}.")
    if basis == "cumulative":
        return {r.fips: r.cumulative_cases for r in records if r.date == day}
    day64 = np.datetime64(day, "D")
    result = {}
    for fips, series in new_cases(records).items():
        position = np.searchsorted(series.dates, day64)
        if position < len(series) and series.dates[position] == day64:
            result[fips] = int(series.values[position])
    return result


def daily_case_maps(records: Iterable[CountyDay], basis: str = "new") -> Dict[date, Dict[str, int]]:
    """For every date present in the records, the fips -> count map used to build that day's network."""
    if basis not in ("new", "cumulative"):
        raise ValueError(f"Unknown case basis {basis!r}.")
    table = _records_frame(records).sort_values(["fips", "date"], kind="mergesort")
    if basis == "new":
        table["count"] = table.groupby("fips")["cases"].diff().fillna(table["cases"]).astype(np.int64)
    else:
        table["count"] = table["cases"]
    maps: Dict[date, Dict[str, int]] = {}
    for day, group in table.groupby("date", sort=True):
        maps[day] = dict(zip(group["fips"], group["count"].astype(int)))
    return maps


def us_aggregates(records: Iterable[CountyDay]) -> Dict[str, DailySeries]:
    """
    National totals derived from county records: total / new cases and total / new deaths per date.

    A county's cumulative counts are carried forward over dates where it has no row.
    """
    table = _records_frame(records)
    result = {}
    for field, total_name, new_name in (
        ("cases", "us_total_cases", "us_new_cases"),
        ("deaths", "us_total_deaths", "us_new_deaths"),
    ):
        wide = table.pivot(index="date", columns="fips", values=field).sort_index().ffill().fillna(0.0)
        totals = wide.sum(axis=1)
        new = wide.diff().fillna(wide).sum(axis=1)
        result[total_name] = DailySeries(list(totals.index), totals.to_numpy(), CalendarKind.CALENDAR, total_name)
        result[new_name] = DailySeries(list(new.index), new.to_numpy(), CalendarKind.CALENDAR, new_name)
    return result


def read_price_csv(path: PathLike) -> DailySeries:
    """
    Read closing prices with header ``date,close`` into a trading-day series, sorted by date.

    Raises
    ------
    DuplicateDate
        The same date appears twice.
    """
    df = _read_frame(path, PRICE_COLUMNS)
    dates = _parse_dates(path, df["date"])
    close = _parse_floats(path, df["close"], "close")
    duplicated = dates.duplicated()
    if duplicated.any():
        raise DuplicateDate(f"{Path(path).name}: date {dates[duplicated].iloc[0].date()} appears twice.")
    order = np.argsort(dates.to_numpy(), kind="mergesort")
    return DailySeries(
        dates.to_numpy()[order], close.to_numpy()[order], CalendarKind.TRADING, "close"
    )


def _read_long_csv(path: PathLike, columns: Sequence[str]) -> Dict[str, DailySeries]:
    key = columns[1]
    df = _read_frame(path, columns)
    dates = _parse_dates(path, df["date"])
    values = _parse_floats(path, df["value"], "value")
    _first_bad(path, df[key] == "", f"{key} is empty")
    table = pd.DataFrame({"date": dates, "key": df[key], "value": values})
    duplicated = table.duplicated(["key", "date"])
    if duplicated.any():
        row = table[duplicated].iloc[0]
        raise DuplicateDate(f"{Path(path).name}: {key} {row['key']!r} has two rows on {row['date'].date()}.")
    result = {}
    for name, group in table.sort_values("date", kind="mergesort").groupby("key", sort=True):
        result[name] = DailySeries(group["date"].to_numpy(), group["value"].to_numpy(), CalendarKind.CALENDAR, name)
    return result


def read_trends_csv(path: PathLike) -> Dict[str, DailySeries]:
    """Read search volumes with header ``date,query,value`` into one calendar-day series per query."""
    return _read_long_csv(path, TRENDS_COLUMNS)


def read_covid_totals_csv(path: PathLike) -> Dict[str, DailySeries]:
    """Read aggregate Covid counts with header ``date,variable,value`` into one series per variable."""
    return _read_long_csv(path, TOTALS_COLUMNS)


def read_geo_csv(path: PathLike) -> List[CountyGeo]:
    """
    Read county centroids with header ``fips,name,state,lat,lon``.

    Raises
    ------
    MalformedRow
        Bad identifier or coordinate out of range.
    DuplicateFips
        A county appears twice.
    """
    df = _read_frame(path, GEO_COLUMNS)
    _first_bad(path, ~df["fips"].str.fullmatch(r"\d{1,5}"), "fips is not a county identifier")
    lat = _parse_floats(path, df["lat"], "lat")
    lon = _parse_floats(path, df["lon"], "lon")
    _first_bad(path, (lat < -90) | (lat > 90), "lat is out of [-90, 90]")
    _first_bad(path, (lon < -180) | (lon > 180), "lon is out of [-180, 180]")
    fips = df["fips"].str.zfill(5)
    duplicated = fips.duplicated()
    if duplicated.any():
        raise DuplicateFips(f"{Path(path).name}: county {fips[duplicated].iloc[0]} appears twice.")
    return [
        CountyGeo(fips=f, latitude=float(a), longitude=float(o), name=n, state=s)
        for f, a, o, n, s in zip(fips, lat, lon, df["name"], df["state"])
    ]


def write_county_cases_csv(records: Iterable[CountyDay], path: PathLike) -> Path:
    """Write records in the county case format, sorted by (date, fips)."""
    df = pd.DataFrame(
        [
            (r.date.isoformat(), r.county, r.state, r.fips, r.cumulative_cases, r.cumulative_deaths)
            for r in sorted(records, key=lambda r: (r.date, r.fips))
        ],
        columns=list(CASES_COLUMNS),
    )
    return write_table(df, path, float_format=None)


def write_price_csv(prices: DailySeries, path: PathLike) -> Path:
    """Write a price series as ``date,close``."""
    df = pd.DataFrame({"date": [str(d) for d in prices.dates], "close": prices.values})
    return write_table(df, path, float_format=None)


def _write_long_csv(series: Dict[str, DailySeries], path: PathLike, key: str) -> Path:
    rows = [
        (str(d), name, v)
        for name in sorted(series)
        for d, v in zip(series[name].dates, series[name].values)
    ]
    df = pd.DataFrame(rows, columns=["date", key, "value"]).sort_values(["date", key], kind="mergesort")
    return write_table(df, path, float_format=None)


def write_trends_csv(trends: Dict[str, DailySeries], path: PathLike) -> Path:
    """Write search volumes as ``date,query,value``."""
    return _write_long_csv(trends, path, "query")


def write_covid_totals_csv(totals: Dict[str, DailySeries], path: PathLike) -> Path:
    """Write aggregate Covid counts as ``date,variable,value``."""
    return _write_long_csv(totals, path, "variable")


def write_geo_csv(geo: Iterable[CountyGeo], path: PathLike) -> Path:
    """Write centroids as ``fips,name,state,lat,lon``."""
    df = pd.DataFrame(
        [(g.fips, g.name, g.state, g.latitude, g.longitude) for g in sorted(geo, key=lambda g: g.fips)],
        columns=list(GEO_COLUMNS),
    )
    return write_table(df, path, float_format=None)
