"""ISO-8601 week binning of monthly counts and re-aggregation back to months.

The mass model is day-level: a month's count is spread uniformly over its
calendar days, and a week's count uniformly over its seven days. Both
directions therefore conserve totals exactly (up to float rounding) whenever
the covered day ranges agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .series import MonthlySeries, MonthPeriod, SeriesError, months_between, _frozen_array


class CoverageError(SeriesError):
    """Weekly data does not cover the requested calendar range."""


def _weeks_in_year(iso_year: int) -> int:
    # Dec 28 always falls in the last ISO week of its year.
    return date(iso_year, 12, 28).isocalendar()[1]


@dataclass(frozen=True, order=True)
class IsoWeek:
    iso_year: int
    iso_week: int

    def __post_init__(self):
        if not 1 <= self.iso_week <= _weeks_in_year(self.iso_year):
            raise SeriesError(f"{self.iso_year} has no ISO week {self.iso_week}")

    @classmethod
    def of(cls, day: date) -> IsoWeek:
        y, w, _ = day.isocalendar()
        return cls(y, w)

    @property
    def monday(self) -> date:
        return date.fromisocalendar(self.iso_year, self.iso_week, 1)

    @property
    def sunday(self) -> date:
        return self.monday + timedelta(days=6)

    def shift(self, weeks: int) -> IsoWeek:
        return IsoWeek.of(self.monday + timedelta(weeks=weeks))

    def weeks_since(self, other: IsoWeek) -> int:
        return (self.monday - other.monday).days // 7

    def __str__(self) -> str:
        return f"{self.iso_year}-W{self.iso_week:02d}"


@dataclass(frozen=True, eq=False)
class WeeklySeries:
    """Real-valued counts per ISO week, contiguous from ``first_week``."""

    first_week: IsoWeek
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise SeriesError("weekly values must be finite and nonnegative")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def weeks(self) -> list[IsoWeek]:
        return [self.first_week.shift(i) for i in range(len(self.values))]

    @property
    def last_week(self) -> IsoWeek:
        return self.first_week.shift(len(self.values) - 1)


def iso_week_bins(first_day: date, last_day: date) -> list[IsoWeek]:
    """Every ISO week touching ``[first_day, last_day]``, in order."""
    if first_day > last_day:
        raise SeriesError(f"reversed range {first_day} > {last_day}")
    first = IsoWeek.of(first_day)
    n = IsoWeek.of(last_day).weeks_since(first) + 1
    return [first.shift(i) for i in range(n)]


def _day_ordinals(first_day: date, last_day: date) -> np.ndarray:
    return np.arange(first_day.toordinal(), last_day.toordinal() + 1)


def monthly_to_weekly(s: MonthlySeries) -> WeeklySeries:
    """Spread each month uniformly over its days and sum the days per ISO week.

    Boundary weeks that extend outside the series keep only the in-range mass.
    """
    if len(s) == 0:
        raise SeriesError("cannot resample an empty series")
    first_day, last_day = s.origin.first_day, s.last.last_day
    days_per_month = np.array([p.days for p in s.periods])
    daily = np.repeat(s.values / days_per_month, days_per_month)

    first_week = IsoWeek.of(first_day)
    # Monday ordinal is 1 mod 7 (date(1, 1, 1) is a Monday).
    ordinals = _day_ordinals(first_day, last_day)
    week_idx = (ordinals - first_week.monday.toordinal()) // 7
    n_weeks = IsoWeek.of(last_day).weeks_since(first_week) + 1
    weekly = np.bincount(week_idx, weights=daily, minlength=n_weeks)
    return WeeklySeries(first_week, weekly)


def weekly_to_monthly(w: WeeklySeries, first_month: MonthPeriod,
                      last_month: MonthPeriod) -> MonthlySeries:
    """Spread each week over its seven days and sum the days per month.

    Raises:
        CoverageError: if some day of the month range lies outside ``w``.
    """
    months = list(months_between(first_month, last_month))
    first_day, last_day = first_month.first_day, last_month.last_day
    ordinals = _day_ordinals(first_day, last_day)
    week_idx = (ordinals - w.first_week.monday.toordinal()) // 7
    if week_idx[0] < 0 or week_idx[-1] >= len(w):
        raise CoverageError(
            f"weeks {w.first_week}..{w.last_week} do not cover {first_month}..{last_month}"
        )
    daily = w.values[week_idx] / 7.0
    days_per_month = np.array([p.days for p in months])
    month_idx = np.repeat(np.arange(len(months)), days_per_month)
    monthly = np.bincount(month_idx, weights=daily, minlength=len(months))
    return MonthlySeries(first_month, monthly)


def weekly_to_csv(w: WeeklySeries) -> str:
    lines = ["iso_year,iso_week,cases"]
    lines += [f"{wk.iso_year},{wk.iso_week},{v!r}" for wk, v in zip(w.weeks, w.values.tolist())]
    return "\n".join(lines) + "\n"
