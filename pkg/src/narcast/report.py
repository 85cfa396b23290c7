"""SDG-3 progress arithmetic, actual-vs-predicted tables, SVG charts and the
output file set of a pipeline run."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .forecaster import forecast_to_csv
from .metrics import MetricsReport, metric_consistency_check, point_metrics
from .resample import weekly_to_csv
from .series import MonthlySeries, MonthPeriod, month_index

# Published reference figures. None of them can be derived from the
# bundled monthly data; they are kept here so every use is auditable.
BASELINE_PERIOD = MonthPeriod(2010, 12)
BASELINE_CASES = 174
ANNUAL_BASELINE_YEAR = 2010
ANNUAL_BASELINE_CASES = 1591
SDG3_REQUIRED_DECLINE_PCT = 90  # integer percent keeps the ceiling exact

PUBLISHED = {
    "forecast_dec_2030": 457,
    "forecast_annual_2030": 4144,
    "percent_change_monthly": 162.91,
    "percent_change_annual": 160.49,
    "aggregate_dec_2030_table": 145_723,
    "aggregate_dec_2030_summary": 145_273,
    "aggregate_feb_2022_text": 93_557,
    "forecast_month_index_range": (27, 158),
    "r_all": 0.93754,
    "r_train": 0.95366,
    "r_test": 0.90746,
}
PUBLISHED_METRICS = {"rmse": 36.92, "mae": 180.76, "mape": 28.54, "r_squared": 0.5872}

OUTPUT_FILES = (
    "forecast.csv", "weekly.csv", "metrics.csv", "comparison.csv", "report.txt",
    "trend_monthly.svg", "trend_cumulative.svg", "acf.svg",
)


def percentage_change(base: float, new: float) -> float:
    if base <= 0:
        raise ValueError(f"percentage change needs a positive base, got {base}")
    return 100.0 * (new - base) / base


@dataclass(frozen=True)
class Sdg3Report:
    baseline_period: MonthPeriod
    baseline_cases: float
    target_period: MonthPeriod
    forecast_cases: float
    percent_change: float
    required_ceiling: float
    achieved: bool
    annual_baseline: float | None = None
    annual_forecast: float | None = None
    annual_percent_change: float | None = None


def sdg3_assess(baseline_period: MonthPeriod, baseline_cases: float, target_period: MonthPeriod,
                forecast_cases: float, annual_baseline: float | None = None,
                annual_forecast: float | None = None) -> Sdg3Report:
    """The target is met when new cases fall to at most 10% of the baseline."""
    if baseline_cases <= 0:
        raise ValueError("SDG-3 baseline must be positive")
    ceiling = baseline_cases * (100 - SDG3_REQUIRED_DECLINE_PCT) / 100
    annual_pct = None
    if annual_baseline is not None and annual_forecast is not None:
        annual_pct = percentage_change(annual_baseline, annual_forecast)
    return Sdg3Report(
        baseline_period=baseline_period,
        baseline_cases=baseline_cases,
        target_period=target_period,
        forecast_cases=forecast_cases,
        percent_change=percentage_change(baseline_cases, forecast_cases),
        required_ceiling=ceiling,
        achieved=forecast_cases <= ceiling,
        annual_baseline=annual_baseline,
        annual_forecast=annual_forecast,
        annual_percent_change=annual_pct,
    )


@dataclass
class ComparisonTable:
    periods: list
    actual: np.ndarray
    predicted: np.ndarray
    metrics: MetricsReport | None

    @property
    def residual(self) -> np.ndarray:
        return self.actual - self.predicted

    def __len__(self) -> int:
        return len(self.periods)


def comparison_table(actual: MonthlySeries, predicted: MonthlySeries) -> ComparisonTable:
    """Row-aligned actual vs predicted months with residuals and summary metrics."""
    if actual.origin != predicted.origin or len(actual) != len(predicted):
        raise ValueError(
            f"period mismatch: actual starts {actual.origin} ({len(actual)} months), "
            f"predicted starts {predicted.origin} ({len(predicted)} months)"
        )
    try:
        m = point_metrics(predicted.values, actual.values)
    except ValueError:
        m = None
    return ComparisonTable(actual.periods, actual.values.copy(), predicted.values.copy(), m)


def published_forecast_rows() -> list[tuple[str, int, int]]:
    text = resources.files("narcast").joinpath("data/published_forecast.csv").read_text(encoding="utf-8")
    return [(r["period"], int(r["monthly_cases"]), int(r["aggregated_cases"]))
            for r in csv.DictReader(io.StringIO(text))]


def aggregate_breaks(rows, tolerance: float = 1.0) -> list[str]:
    """Rows whose aggregated step differs from the monthly value by more than ``tolerance``."""
    out = []
    for (_, _, prev_agg), (period, monthly, agg) in zip(rows, rows[1:]):
        if abs((agg - prev_agg) - monthly) > tolerance:
            out.append(f"{period}: aggregated rises by {agg - prev_agg} but monthly value is {monthly}")
    return out


# --- SVG -----------------------------------------------------------------------

_W, _H = 760, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _scale(lo, hi, a, b):
    if hi == lo:
        hi = lo + 1.0
    return lambda v: a + (v - lo) * (b - a) / (hi - lo)


def _frame(title, xlabel, ylabel, ylo, yhi, xticks):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_H / 2})">{ylabel}</text>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
    ]
    sy = _scale(ylo, yhi, _H - _MB, _MT)
    for v in np.linspace(ylo, yhi, 6):
        y = sy(v)
        parts.append(f'<line x1="{_ML - 4}" y1="{_fmt(y)}" x2="{_ML}" y2="{_fmt(y)}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 6}" y="{_fmt(y + 4)}" text-anchor="end">{v:.4g}</text>')
    for x, label in xticks:
        parts.append(f'<line x1="{_fmt(x)}" y1="{_H - _MB}" x2="{_fmt(x)}" y2="{_H - _MB + 4}" stroke="black"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{_H - _MB + 16}" text-anchor="middle">{label}</text>')
    return parts, sy


def line_chart(title: str, xlabel: str, ylabel: str, labels: list, series: list) -> str:
    """Multi-series line chart over a shared categorical x axis.

    ``series`` is a list of ``(name, values)``; ``values`` align with
    ``labels`` and may contain NaN where a series has no point.
    """
    n = len(labels)
    finite = [v for _, vals in series for v in vals if np.isfinite(v)]
    ylo = min(0.0, min(finite)) if finite else 0.0
    yhi = max(finite) * 1.05 if finite and max(finite) > 0 else 1.0
    sx = _scale(0, max(n - 1, 1), _ML, _W - _MR)
    step = max(1, n // 10)
    ticks = [(sx(i), labels[i]) for i in range(0, n, step)]
    parts, sy = _frame(title, xlabel, ylabel, ylo, yhi, ticks)
    for k, (name, vals) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        runs, cur = [], []
        for i, v in enumerate(vals):
            if np.isfinite(v):
                cur.append(f"{_fmt(sx(i))},{_fmt(sy(v))}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for run in runs:
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(run)}"/>')
        ly = _MT + 14 * k
        parts.append(f'<line x1="{_W - 170}" y1="{ly}" x2="{_W - 150}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_W - 145}" y="{ly + 4}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def acf_chart(acf, title: str = "Residual autocorrelation") -> str:
    lags, coef, bound = acf.lags, acf.coefficients, acf.confidence_bound
    sx = _scale(-0.5, len(lags) - 0.5, _ML, _W - _MR)
    ticks = [(sx(k), str(int(k))) for k in lags]
    parts, sy = _frame(title, "lag", "autocorrelation", -1.0, 1.0, ticks)
    for b in (bound, -bound):
        parts.append(f'<line x1="{_ML}" y1="{_fmt(sy(b))}" x2="{_W - _MR}" y2="{_fmt(sy(b))}" '
                     'stroke="#d62728" stroke-dasharray="4,3"/>')
    parts.append(f'<line x1="{_ML}" y1="{_fmt(sy(0))}" x2="{_W - _MR}" y2="{_fmt(sy(0))}" stroke="#999"/>')
    for k, c in zip(lags, coef):
        parts.append(f'<line x1="{_fmt(sx(k))}" y1="{_fmt(sy(0))}" x2="{_fmt(sx(k))}" '
                     f'y2="{_fmt(sy(c))}" stroke="#1f77b4" stroke-width="3"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# --- text and file output --------------------------------------------------------

def sdg3_lines(rep: Sdg3Report, label: str) -> list[str]:
    lines = [
        f"[{label}]",
        f"baseline_period = {rep.baseline_period}",
        f"baseline_cases = {rep.baseline_cases:g}",
        f"target_period = {rep.target_period}",
        f"forecast_cases = {rep.forecast_cases:.2f}",
        f"percent_change = {rep.percent_change:.2f}",
        f"required_ceiling = {rep.required_ceiling:.2f}",
        f"achieved = {'yes' if rep.achieved else 'no'}",
    ]
    if rep.annual_percent_change is not None:
        lines += [
            f"annual_baseline = {rep.annual_baseline:g}",
            f"annual_forecast = {rep.annual_forecast:.2f}",
            f"annual_percent_change = {rep.annual_percent_change:.2f}",
        ]
    return lines


def run_sdg3(run) -> Sdg3Report | None:
    fc = run.forecast
    if fc is None:
        return None
    target = fc.monthly.last
    annual = None
    year_months = [v for p, v in zip(fc.monthly.periods, fc.monthly.values) if p.year == target.year]
    if len(year_months) == 12:
        annual = float(np.sum(year_months))
    return sdg3_assess(BASELINE_PERIOD, BASELINE_CASES, target, fc.monthly.values[-1],
                       ANNUAL_BASELINE_CASES if annual is not None else None, annual)


def published_sdg3() -> Sdg3Report:
    return sdg3_assess(BASELINE_PERIOD, BASELINE_CASES, MonthPeriod(2030, 12),
                       PUBLISHED["forecast_dec_2030"], ANNUAL_BASELINE_CASES,
                       PUBLISHED["forecast_annual_2030"])


def _metric_line(name, m: MetricsReport) -> str:
    return (f"{name}: n={m.n} rmse={m.rmse:.4f} mae={m.mae:.4f} mape={m.mape:.4f} "
            f"r_squared={m.r_squared:.4f} pearson_r={m.pearson_r:.4f} mape_excluded={m.mape_excluded}")


def render_report(run) -> str:
    cfg, tc, rep = run.config, run.config.training, run.training
    out = []
    add = out.append

    add("DATA")
    add(f"source = {cfg.data_label}")
    add(f"months = {len(run.monthly)} ({run.monthly.origin} .. {run.monthly.last})")
    add(f"total_incident = {run.monthly.values.sum():.2f}")
    add(f"aggregate_before_origin = {cfg.base:.2f}")
    add(f"aggregate_at_end = {run.last_aggregate:.2f}")
    add(f"weekly_bins = {len(run.weekly)} ({run.weekly.first_week} .. {run.weekly.last_week})")
    add(f"weekly_total = {run.weekly.values.sum():.6f}")
    add(f"note: published text quotes the end-of-data aggregate as {PUBLISHED['aggregate_feb_2022_text']}")
    add("")

    net = run.net
    add("MODEL")
    add(f"structure = {net.delays} delays, {net.hidden} hidden ({net.hidden_activation.value}), "
        f"1 output ({net.output_activation.value})")
    add(f"parameters = {net.n_params}")
    add(f"normalization = [{net.norm.raw_min:.6f}, {net.norm.raw_max:.6f}] -> [-1, 1]")
    add(f"kernel_backend = {run.backend}")
    add("")

    add("TRAINING")
    add(f"seed = {tc.seed}")
    add(f"ratios = {','.join(f'{r:g}' for r in tc.ratios)}")
    add(f"max_epochs = {tc.max_epochs}")
    add(f"patience = {tc.patience}")
    add(f"lm_lambda0 = {tc.lm_lambda0:g}")
    add(f"lm_lambda_factor = {tc.lm_lambda_factor:g}")
    add(f"lm_lambda_max = {tc.lm_lambda_max:g}")
    add(f"samples = {len(run.dataset)}; split = {'/'.join(map(str, run.split.sizes))}")
    add(f"split of {len(run.weekly)} weekly points under the same ratios = "
        f"{'/'.join(map(str, run.raw_series_split))}")
    add(f"epochs_run = {rep.epochs_run}")
    add(f"stop_reason = {rep.stop_reason}")
    add(f"best_epoch = {rep.best_epoch}")
    add(f"initial_train_mse = {rep.train_mse_history[0]:.6e}")
    for name in ("train", "validation", "test", "all"):
        add(f"normalized_mse.{name} = {rep.mse[name]:.6e}; R.{name} = {rep.pearson_r[name]:.5f}")
    for name in ("train", "validation", "test", "all"):
        add(_metric_line(f"weekly_metrics.{name}", run.metrics[name]))
    if run.comparison.metrics is not None:
        add(_metric_line(f"monthly_comparison ({run.comparison.periods[0]} .. "
                         f"{run.comparison.periods[-1]})", run.comparison.metrics))
    add(f"published R: all {PUBLISHED['r_all']}, train {PUBLISHED['r_train']}, test {PUBLISHED['r_test']}")
    add("")

    add("FORECAST")
    add(f"horizon = {cfg.horizon}")
    add(f"weekly_steps = {run.steps}")
    fc = run.forecast
    if fc is None:
        add("forecast = none (horizon does not extend past the data)")
    else:
        first, last = fc.monthly.origin, fc.monthly.last
        add(f"months = {first} .. {last} (index {month_index(first, run.monthly.origin)}"
            f"-{month_index(last, run.monthly.origin)}; published text says "
            f"{PUBLISHED['forecast_month_index_range'][0]}-{PUBLISHED['forecast_month_index_range'][1]})")
        add(f"first_forecast_week = {run.weekly.last_week.shift(1)}")
        add(f"monthly_at_horizon = {fc.monthly.values[-1]:.2f}")
        add(f"aggregate_at_horizon = {fc.cumulative.values[-1]:.2f}")
        add(f"monthly_min = {fc.monthly.values.min():.2f}; monthly_max = {fc.monthly.values.max():.2f}")
    add(f"published aggregate for 2030-12: table {PUBLISHED['aggregate_dec_2030_table']}, "
        f"summary {PUBLISHED['aggregate_dec_2030_summary']}")
    add("")

    add("SDG-3")
    add(f"requirement = {SDG3_REQUIRED_DECLINE_PCT}% decline in new cases from the "
        f"{BASELINE_PERIOD} baseline ({BASELINE_CASES}); annual {ANNUAL_BASELINE_YEAR} baseline "
        f"{ANNUAL_BASELINE_CASES}")
    ours = run_sdg3(run)
    if ours is None:
        add("[this run] no forecast")
    else:
        out.extend(sdg3_lines(ours, "this run"))
    pub = published_sdg3()
    out.extend(sdg3_lines(pub, "published forecast"))
    add(f"published percent_change = {PUBLISHED['percent_change_monthly']:.2f} "
        f"(recomputed {pub.percent_change:.2f})")
    add(f"published annual_percent_change = {PUBLISHED['percent_change_annual']:.2f} "
        f"(recomputed {pub.annual_percent_change:.2f})")
    add("")

    add("CONSISTENCY")
    own = run.metrics["all"]
    own_flags = metric_consistency_check(
        {"rmse": own.rmse, "mae": own.mae, "mape": own.mape, "r_squared": own.r_squared})
    add(f"this run: {len(own_flags)} violation(s)")
    out.extend(f"  - {v}" for v in own_flags)
    pub_flags = metric_consistency_check(PUBLISHED_METRICS)
    add("published metrics " + ", ".join(f"{k}={v}" for k, v in PUBLISHED_METRICS.items())
        + f": {len(pub_flags)} violation(s)")
    out.extend(f"  - {v}" for v in pub_flags)
    breaks = aggregate_breaks(published_forecast_rows())
    add(f"published forecast table: {len(breaks)} aggregated-column break(s)")
    out.extend(f"  - {b}" for b in breaks)
    if PUBLISHED["aggregate_dec_2030_table"] != PUBLISHED["aggregate_dec_2030_summary"]:
        add(f"  - 2030-12 aggregate is {PUBLISHED['aggregate_dec_2030_table']} in the table but "
            f"{PUBLISHED['aggregate_dec_2030_summary']} in the summary")
    return "\n".join(out) + "\n"


def metrics_csv(run) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subset", "n", "rmse", "mae", "mape", "r_squared", "pearson_r", "mape_excluded"])
    rows = [(name, run.metrics[name]) for name in ("train", "validation", "test", "all")]
    if run.comparison.metrics is not None:
        rows.append(("monthly_comparison", run.comparison.metrics))
    for name, m in rows:
        w.writerow([name, m.n] + [f"{x:.6f}" for x in (m.rmse, m.mae, m.mape, m.r_squared, m.pearson_r)]
                   + [m.mape_excluded])
    return buf.getvalue()


def comparison_csv(table: ComparisonTable) -> str:
    lines = ["period,actual,predicted,residual"]
    for p, a, f, r in zip(table.periods, table.actual, table.predicted, table.residual):
        lines.append(f"{p},{a:.2f},{f:.2f},{r:.2f}")
    return "\n".join(lines) + "\n"


def _trend_charts(run) -> tuple[str, str]:
    obs = run.monthly
    fc = run.forecast
    periods = obs.periods + (fc.monthly.periods if fc else [])
    labels = [str(p) for p in periods]
    n_obs = len(obs)
    nan_tail = [np.nan] * (len(periods) - n_obs)
    actual = list(obs.values) + nan_tail
    cum_obs = list(run.config.base + np.cumsum(obs.values)) + nan_tail
    fitted = [np.nan] * len(periods)
    for p, v in zip(run.comparison.periods, run.comparison.predicted):
        fitted[periods.index(p)] = v
    pred = [np.nan] * len(periods)
    cum_pred = [np.nan] * len(periods)
    if fc:
        # start the forecast lines at the last observation so they join up
        pred[n_obs - 1] = obs.values[-1]
        cum_pred[n_obs - 1] = run.last_aggregate
        pred[n_obs:] = fc.monthly.values
        cum_pred[n_obs:] = fc.cumulative.values
    monthly = line_chart("New HIV cases per month", "month", "cases", labels,
                         [("actual", actual), ("fitted", fitted), ("forecast", pred)])
    cumulative = line_chart("Aggregated HIV cases", "month", "cases", labels,
                            [("actual", cum_obs), ("forecast", cum_pred)])
    return monthly, cumulative


def emit_outputs(run, out_dir) -> list[Path]:
    """Write the fixed output file set for ``run``; returns the written paths."""
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    monthly_svg, cumulative_svg = _trend_charts(run)
    contents = {
        "forecast.csv": forecast_to_csv(run.forecast),
        "weekly.csv": weekly_to_csv(run.weekly),
        "metrics.csv": metrics_csv(run),
        "comparison.csv": comparison_csv(run.comparison),
        "report.txt": render_report(run),
        "trend_monthly.svg": monthly_svg,
        "trend_cumulative.svg": cumulative_svg,
        "acf.svg": acf_chart(run.acf),
    }
    written = []
    for name in OUTPUT_FILES:
        path = out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(contents[name])
        written.append(path)
    return written
