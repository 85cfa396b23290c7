"""Point forecast metrics, Pearson correlation, residual ACF and a sanity
check for published metric sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    mae: float
    mape: float
    r_squared: float
    pearson_r: float
    n: int
    mape_excluded: int = 0

    def as_row(self) -> dict:
        return {
            "n": self.n, "rmse": self.rmse, "mae": self.mae, "mape": self.mape,
            "r_squared": self.r_squared, "pearson_r": self.pearson_r,
            "mape_excluded": self.mape_excluded,
        }


def _pair(predicted, actual):
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    a = np.asarray(actual, dtype=np.float64).reshape(-1)
    if p.shape != a.shape:
        raise ValueError(f"length mismatch: {p.size} predicted vs {a.size} actual")
    if p.size == 0:
        raise ValueError("metrics need at least one point")
    return p, a


def pearson_r(x, y) -> float:
    x, y = _pair(x, y)
    if x.size < 2:
        raise ValueError("correlation needs at least two points")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0 or syy == 0:
        raise ValueError("correlation is undefined for a constant input")
    return float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def point_metrics(predicted, actual) -> MetricsReport:
    """RMSE, MAE, MAPE (percent), R^2 about the mean of ``actual``, and Pearson r.

    MAPE skips points whose actual value is 0 and reports how many were
    skipped. Pearson r is NaN when either side is constant; R^2 raises.
    """
    p, a = _pair(predicted, actual)
    err = p - a
    rmse = float(np.sqrt(np.mean(err * err)))
    mae = float(np.mean(np.abs(err)))
    nz = a != 0
    with np.errstate(over="ignore"):
        mape = float(np.mean(np.abs(err[nz] / a[nz])) * 100.0) if nz.any() else float("nan")
    dev = a - a.mean()
    sst = float(dev @ dev)
    if sst == 0:
        raise ValueError("R^2 is undefined when actual values are constant")
    r2 = 1.0 - float(err @ err) / sst
    try:
        r = pearson_r(p, a)
    except ValueError:
        r = float("nan")
    return MetricsReport(rmse, mae, mape, r2, r, int(a.size), int((~nz).sum()))


@dataclass(frozen=True, eq=False)
class AcfReport:
    lags: np.ndarray
    coefficients: np.ndarray
    confidence_bound: float


def residual_autocorrelation(errors, max_lag: int) -> AcfReport:
    """Biased sample autocorrelation for lags 0..max_lag with a 1.96/sqrt(n) band."""
    e = np.asarray(errors, dtype=np.float64).reshape(-1)
    n = e.size
    if max_lag < 0 or max_lag >= n:
        raise ValueError(f"max_lag must be in [0, {n - 1}], got {max_lag}")
    d = e - e.mean()
    denom = float(d @ d)
    if denom == 0:
        raise ValueError("autocorrelation is undefined for a constant series")
    coef = np.array([d[: n - k] @ d[k:] for k in range(max_lag + 1)]) / denom
    return AcfReport(np.arange(max_lag + 1), coef, 1.96 / np.sqrt(n))


def metric_consistency_check(claimed: dict) -> list[str]:
    """Flag metric combinations no dataset can produce."""
    out = []
    rmse, mae = claimed.get("rmse"), claimed.get("mae")
    if rmse is not None and mae is not None and rmse < mae:
        out.append(f"RMSE < MAE ({rmse} < {mae}): impossible, RMSE >= MAE for every dataset")
    r2 = claimed.get("r_squared")
    if r2 is not None and r2 > 1:
        out.append(f"R^2 > 1 ({r2}): impossible, R^2 <= 1 by definition")
    for key in ("rmse", "mae", "mape"):
        v = claimed.get(key)
        if v is not None and v < 0:
            out.append(f"negative {key.upper()} ({v}): error metrics are nonnegative")
    return out
