"""Closed-loop multi-week forecasting and assembly into monthly/cumulative output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .network import NarNetwork
from .resample import IsoWeek, WeeklySeries, weekly_to_monthly
from .series import (CumulativeSeries, MonthlySeries, MonthPeriod, SeriesError,
                     cumulative_from_incident)


class ForecastError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ForecastResult:
    weekly: WeeklySeries
    monthly: MonthlySeries
    cumulative: CumulativeSeries


def horizon_weeks(last_observed: IsoWeek, target_month: MonthPeriod) -> int:
    """ISO weeks after ``last_observed`` through the week holding the target's last day."""
    end = IsoWeek.of(target_month.last_day)
    steps = end.weeks_since(last_observed)
    if steps < 1:
        raise SeriesError(f"target {target_month} does not end after observed week {last_observed}")
    return steps


def closed_loop_forecast(net: NarNetwork, seed_window, steps: int) -> np.ndarray:
    """Feed each prediction back as the newest lag; returns ``steps`` raw values.

    Predictions below zero are clamped to 0 before re-entering the window.
    """
    window = np.ascontiguousarray(seed_window, dtype=np.float64)
    if window.shape != (net.delays,):
        raise ValueError(f"seed window must have {net.delays} values, got shape {window.shape}")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if not np.all(np.isfinite(window)):
        raise ValueError("non-finite seed window")
    if steps == 0:
        return np.empty(0)
    # overflow is reported below as ForecastError
    with np.errstate(over="ignore", invalid="ignore"):
        out = _kernels.rollout(net.input_weights, net.hidden_biases, net.output_weights,
                               net.output_bias, net.hidden_activation.code,
                               net.output_activation.code, window, int(steps),
                               net.norm.raw_min, net.norm.raw_max)
    if not np.all(np.isfinite(out)):
        raise ForecastError(f"non-finite prediction at step {int(np.argmin(np.isfinite(out))) + 1}")
    return out


def splice_week(observed: WeeklySeries, last_observed_day) -> float:
    """Full-week equivalent of the final, partially observed week.

    The observed bin only holds the mass of its in-range days; scaling to
    seven days at the same daily rate lets the days after the observation
    end be attributed without re-forecasting that week.
    """
    last = observed.last_week
    in_range = (last_observed_day - last.monday).days + 1
    if not 1 <= in_range <= 7:
        raise SeriesError(f"{last_observed_day} is not in the final observed week {last}")
    return float(observed.values[-1]) * 7.0 / in_range


def assemble_forecast(weekly_forecast: WeeklySeries, last_observed_month: MonthPeriod,
                      last_observed_aggregate: float, first_target: MonthPeriod,
                      last_target: MonthPeriod) -> ForecastResult:
    """Re-aggregate weekly predictions to months and accumulate from the last observed total."""
    if first_target <= last_observed_month:
        raise SeriesError(f"first target {first_target} is not after {last_observed_month}")
    monthly = weekly_to_monthly(weekly_forecast, first_target, last_target)
    cumulative = cumulative_from_incident(monthly, last_observed_aggregate)
    return ForecastResult(weekly_forecast, monthly, cumulative)


def forecast_to_csv(result: ForecastResult | None) -> str:
    lines = ["period,monthly_cases,aggregated_cases"]
    if result is not None:
        for p, m, c in zip(result.monthly.periods, result.monthly.values, result.cumulative.values):
            lines.append(f"{p},{m:.2f},{c:.2f}")
    return "\n".join(lines) + "\n"
