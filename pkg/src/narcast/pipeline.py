"""End-to-end run: ingest, resample, train, forecast, evaluate."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import _kernels
from .forecaster import (ForecastResult, assemble_forecast, closed_loop_forecast,
                         horizon_weeks, splice_week)
from .metrics import AcfReport, point_metrics, residual_autocorrelation
from .network import NarNetwork, init_network
from .report import ComparisonTable, comparison_table
from .resample import WeeklySeries, monthly_to_weekly, weekly_to_monthly
from .series import MonthlySeries, MonthPeriod, SeriesError, parse_monthly_csv
from .trainer import (SUBSETS, LagDataset, SplitAssignment, TrainingConfig, TrainingReport,
                      build_lag_dataset, random_split, split_sizes, train_levenberg_marquardt)

log = logging.getLogger(__name__)

# Registry total diagnosed before January 2020; makes the bundled series'
# running totals match the published aggregated column (75,846 in Jan 2020).
AGGREGATE_BEFORE_2020 = 74_807

DEFAULT_HORIZON = MonthPeriod(2030, 12)


def bundled_data_text() -> str:
    return resources.files("narcast").joinpath("data/harp_covid.csv").read_text(encoding="utf-8")


@dataclass(frozen=True)
class PipelineConfig:
    data: str | None = None
    delays: int = 10
    hidden: int = 10
    horizon: MonthPeriod = DEFAULT_HORIZON
    base: float = AGGREGATE_BEFORE_2020
    training: TrainingConfig = field(default_factory=TrainingConfig)

    @property
    def data_label(self) -> str:
        return self.data if self.data is not None else "bundled:harp_covid.csv"

    def load_monthly(self) -> MonthlySeries:
        if self.data is None:
            return parse_monthly_csv(bundled_data_text())
        try:
            text = Path(self.data).read_text(encoding="utf-8")
        except OSError as exc:
            raise SeriesError(f"cannot read {self.data}: {exc}") from exc
        return parse_monthly_csv(text)


@dataclass
class PipelineRun:
    config: PipelineConfig
    monthly: MonthlySeries
    weekly: WeeklySeries
    dataset: LagDataset
    split: SplitAssignment
    net: NarNetwork
    training: TrainingReport
    fitted: np.ndarray
    metrics: dict
    acf: AcfReport
    comparison: ComparisonTable
    steps: int
    forecast: ForecastResult | None
    backend: str = _kernels.BACKEND

    @property
    def last_aggregate(self) -> float:
        return self.config.base + float(self.monthly.values.sum())

    @property
    def raw_series_split(self) -> tuple[int, int, int]:
        return split_sizes(len(self.weekly), self.config.training.ratios)


def fitted_comparison(monthly: MonthlySeries, weekly: WeeklySeries, fitted: np.ndarray,
                      d: int) -> ComparisonTable:
    """Compare months fully covered by complete, one-step-fitted weeks."""
    first_fit = weekly.first_week.shift(d)
    last_fit = weekly.last_week
    if last_fit.sunday > monthly.last.last_day:
        last_fit = last_fit.shift(-1)
    first_month = MonthPeriod.of(first_fit.monday)
    if first_fit.monday != first_month.first_day:
        first_month = first_month.shift(1)
    last_month = MonthPeriod.of(last_fit.sunday)
    if last_fit.sunday != last_month.last_day:
        last_month = last_month.shift(-1)
    if last_month < first_month:
        return ComparisonTable([], np.empty(0), np.empty(0), None)
    fit_weeks = WeeklySeries(first_fit, np.maximum(fitted, 0.0))
    predicted = weekly_to_monthly(fit_weeks, first_month, last_month)
    lo = first_month.year * 12 + first_month.month - (monthly.origin.year * 12 + monthly.origin.month)
    actual = MonthlySeries(first_month, monthly.values[lo:lo + len(predicted)])
    return comparison_table(actual, predicted)


def forecast_after(net: NarNetwork, monthly: MonthlySeries, weekly: WeeklySeries,
                   horizon: MonthPeriod, base: float) -> tuple[int, ForecastResult | None]:
    """Forecast from the end of the observed data through ``horizon``.

    The final observed week is completed at its observed daily rate (see
    ``splice_week``) so the first target month is fully covered, and that
    completed value is also the newest lag of the seed window. Forecasting
    itself starts at the following week. Returns ``(0, None)`` when the
    horizon does not extend past the data.
    """
    if horizon <= monthly.last:
        return 0, None
    if len(weekly) < net.delays:
        raise SeriesError(f"need at least {net.delays} weeks of data to seed the forecast")
    steps = horizon_weeks(weekly.last_week, horizon)
    completed = splice_week(weekly, monthly.last.last_day)
    window = weekly.values[-net.delays:].copy()
    window[-1] = completed
    preds = closed_loop_forecast(net, window, steps)
    spliced = WeeklySeries(weekly.last_week, np.concatenate(([completed], preds)))
    result = assemble_forecast(spliced, monthly.last, base + float(monthly.values.sum()),
                               monthly.last.shift(1), horizon)
    return steps, result


def run_pipeline(cfg: PipelineConfig, monthly: MonthlySeries | None = None) -> PipelineRun:
    monthly = monthly if monthly is not None else cfg.load_monthly()
    tc = cfg.training
    weekly = monthly_to_weekly(monthly)
    ds = build_lag_dataset(weekly, cfg.delays)
    split = random_split(len(ds), tc.ratios, tc.seed)
    net0 = init_network(cfg.delays, cfg.hidden, tc.seed, norm=ds.source_scale)
    net, rep = train_levenberg_marquardt(ds, split, tc, net0)

    fitted = net.norm.denormalize(net.predict(ds.inputs))
    raw_targets = weekly.values[cfg.delays:]
    metrics = {}
    for name in SUBSETS:
        idx = split.subset(name)
        metrics[name] = point_metrics(fitted[idx], raw_targets[idx])
    metrics["all"] = point_metrics(fitted, raw_targets)
    resid = raw_targets - fitted
    acf = residual_autocorrelation(resid, min(20, len(resid) - 1))
    comparison = fitted_comparison(monthly, weekly, fitted, cfg.delays)

    steps, forecast = forecast_after(net, monthly, weekly, cfg.horizon, cfg.base)
    log.info("pipeline done: %d forecast weeks", steps)
    return PipelineRun(cfg, monthly, weekly, ds, split, net, rep, fitted, metrics, acf,
                       comparison, steps, forecast)
