"""Monthly incident/cumulative count series, month arithmetic and CSV ingestion."""

from __future__ import annotations

import calendar
import csv
import io
import re
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable

import numpy as np


class SeriesError(ValueError):
    """Raised for malformed or inconsistent series input."""


_PERIOD_RE = re.compile(r"^(\d{4})-(\d{2})$")


@dataclass(frozen=True, order=True)
class MonthPeriod:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise SeriesError(f"month must be in 1..12, got {self.month}")

    @classmethod
    def parse(cls, text: str) -> MonthPeriod:
        m = _PERIOD_RE.match(text.strip())
        if m is None:
            raise SeriesError(f"malformed period {text!r}, expected YYYY-MM")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def of(cls, day: date) -> MonthPeriod:
        return cls(day.year, day.month)

    def shift(self, months: int) -> MonthPeriod:
        k = self.year * 12 + (self.month - 1) + months
        return MonthPeriod(k // 12, k % 12 + 1)

    @property
    def days(self) -> int:
        return calendar.monthrange(self.year, self.month)[1]

    @property
    def first_day(self) -> date:
        return date(self.year, self.month, 1)

    @property
    def last_day(self) -> date:
        return date(self.year, self.month, self.days)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_index(p: MonthPeriod, origin: MonthPeriod) -> int:
    """1-based position of ``p`` in a monthly series starting at ``origin``."""
    if p < origin:
        raise SeriesError(f"{p} precedes origin {origin}")
    return (p.year - origin.year) * 12 + (p.month - origin.month) + 1


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class MonthlySeries:
    """Incident counts per month, contiguous from ``origin``."""

    origin: MonthPeriod
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if not np.all(np.isfinite(arr)):
            raise SeriesError("series contains non-finite values")
        if np.any(arr < 0):
            raise SeriesError("series contains negative counts")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def periods(self) -> list[MonthPeriod]:
        return [self.origin.shift(i) for i in range(len(self.values))]

    @property
    def last(self) -> MonthPeriod:
        if len(self.values) == 0:
            raise SeriesError("empty series has no last period")
        return self.origin.shift(len(self.values) - 1)

    def value_at(self, p: MonthPeriod) -> float:
        i = month_index(p, self.origin) - 1
        if i >= len(self.values):
            raise SeriesError(f"{p} is past the end of the series")
        return float(self.values[i])


@dataclass(frozen=True, eq=False)
class CumulativeSeries:
    """Running totals: ``values[i] = base + sum(incident[:i + 1])``."""

    origin: MonthPeriod
    base: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        object.__setattr__(self, "base", float(self.base))


def cumulative_from_incident(s: MonthlySeries, base: float) -> CumulativeSeries:
    if base < 0:
        raise SeriesError(f"cumulative base must be >= 0, got {base}")
    return CumulativeSeries(s.origin, base, base + np.cumsum(s.values))


def incident_from_cumulative(c: CumulativeSeries) -> MonthlySeries:
    prev = np.concatenate(([c.base], c.values[:-1]))
    incident = c.values - prev
    bad = np.flatnonzero(incident < 0)
    if bad.size:
        raise SeriesError(
            f"cumulative series decreases at {c.origin.shift(int(bad[0]))} "
            "(negative incident count)"
        )
    return MonthlySeries(c.origin, incident)


def format_count(v: float) -> str:
    """Integral counts print without a decimal point; others use repr."""
    v = float(v)
    if v.is_integer():
        return str(int(v))
    return repr(v)


def parse_monthly_csv(text: str) -> MonthlySeries:
    """Parse ``period,cases`` CSV text into a contiguous monthly series.

    Raises:
        SeriesError: on a bad header, empty body, malformed period or count,
            a gap or duplicate month, or a negative count.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows or [c.strip() for c in rows[0]] != ["period", "cases"]:
        raise SeriesError("expected header 'period,cases'")
    body = rows[1:]
    if not body:
        raise SeriesError("empty series: no data rows")

    origin = None
    values = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != 2:
            raise SeriesError(f"line {lineno}: expected 2 fields, got {len(row)}")
        period = MonthPeriod.parse(row[0])
        try:
            v = float(row[1].strip())
        except ValueError:
            raise SeriesError(f"line {lineno}: malformed count {row[1]!r}") from None
        if not np.isfinite(v):
            raise SeriesError(f"line {lineno}: non-finite count")
        if v < 0:
            raise SeriesError(f"line {lineno}: negative count {v}")
        if origin is None:
            origin = period
        else:
            expected = origin.shift(len(values))
            if period < expected:
                raise SeriesError(f"line {lineno}: duplicate or out-of-order period {period}")
            if period != expected:
                raise SeriesError(f"line {lineno}: gap at {expected}")
        values.append(v)
    return MonthlySeries(origin, values)


def read_monthly_csv(path) -> MonthlySeries:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_monthly_csv(fh.read())


def monthly_to_csv(s: MonthlySeries) -> str:
    lines = ["period,cases"]
    lines += [f"{p},{format_count(v)}" for p, v in zip(s.periods, s.values)]
    return "\n".join(lines) + "\n"


def months_between(first: MonthPeriod, last: MonthPeriod) -> Iterable[MonthPeriod]:
    for i in range(month_index(last, first)):
        yield first.shift(i)
