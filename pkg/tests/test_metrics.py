import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from statsmodels.tsa.stattools import acf as sm_acf

from narcast.metrics import (metric_consistency_check, pearson_r, point_metrics,
                             residual_autocorrelation)

finite = st.floats(-1e4, 1e4, allow_nan=False)


def test_small_example():
    m = point_metrics([2, 4], [1, 3])
    assert m.rmse == 1.0
    assert m.mae == 1.0
    assert m.mape == pytest.approx(100 * (1 + 1 / 3) / 2)
    assert round(m.mape, 2) == 66.67
    assert m.n == 2


def test_perfect_fit():
    a = np.array([3.0, 5.0, 9.0, 1.0])
    m = point_metrics(a, a)
    assert (m.rmse, m.mae, m.mape, m.r_squared) == (0.0, 0.0, 0.0, 1.0)
    assert m.pearson_r == pytest.approx(1.0)


def test_mean_predictor_r2_zero():
    a = np.array([1.0, 4.0, 2.0, 9.0])
    m = point_metrics(np.full(4, a.mean()), a)
    assert m.r_squared == pytest.approx(0.0, abs=1e-15)
    assert math.isnan(m.pearson_r)


def test_mape_skips_zero_actuals():
    m = point_metrics([1.0, 2.0, 5.0], [0.0, 1.0, 4.0])
    assert m.mape_excluded == 1
    assert m.mape == pytest.approx(100 * (1.0 + 0.25) / 2)


def test_metric_errors():
    with pytest.raises(ValueError):
        point_metrics([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        point_metrics([], [])
    with pytest.raises(ValueError, match="constant"):
        point_metrics([1, 2, 3], [2, 2, 2])


def test_pearson_sign():
    x = np.arange(10.0)
    assert pearson_r(x, 3 * x + 1) == pytest.approx(1.0)
    assert pearson_r(x, -x) == pytest.approx(-1.0)
    with pytest.raises(ValueError, match="constant"):
        pearson_r(x, np.ones(10))


def test_pearson_matches_numpy(rng):
    x, y = rng.normal(size=50), rng.normal(size=50)
    assert pearson_r(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], rel=1e-12)


# --- ACF ------------------------------------------------------------------------

@pytest.mark.parametrize("n, max_lag", [(30, 10), (104, 20), (500, 40)])
def test_acf_matches_statsmodels(rng, n, max_lag):
    e = rng.normal(size=n).cumsum()
    rep = residual_autocorrelation(e, max_lag)
    np.testing.assert_allclose(rep.coefficients, sm_acf(e, nlags=max_lag, fft=False),
                               rtol=1e-10, atol=1e-12)
    assert rep.lags.tolist() == list(range(max_lag + 1))
    assert rep.coefficients[0] == 1.0


def test_acf_alternating():
    e = np.tile([1.0, -1.0], 100)
    rep = residual_autocorrelation(e, 2)
    assert rep.coefficients[1] == pytest.approx(-0.99, abs=0.02)
    assert rep.coefficients[2] == pytest.approx(0.99, abs=0.02)


def test_acf_bound():
    rep = residual_autocorrelation(np.random.default_rng(0).normal(size=100), 5)
    assert rep.confidence_bound == pytest.approx(0.196)


def test_acf_white_noise_mostly_inside_band():
    e = np.random.default_rng(3).normal(size=2000)
    rep = residual_autocorrelation(e, 40)
    outside = np.sum(np.abs(rep.coefficients[1:]) > rep.confidence_bound)
    assert outside <= 6


def test_acf_errors():
    with pytest.raises(ValueError):
        residual_autocorrelation([1.0, 2.0, 3.0], 3)
    with pytest.raises(ValueError):
        residual_autocorrelation([1.0, 2.0, 3.0], -1)
    with pytest.raises(ValueError, match="constant"):
        residual_autocorrelation([2.0, 2.0, 2.0], 1)


# --- consistency check ----------------------------------------------------------------

def test_published_set_flagged():
    issues = metric_consistency_check({"rmse": 28.54, "mae": 36.92, "mape": 180.76,
                                       "r_squared": 0.5872})
    assert len(issues) == 1
    assert "RMSE < MAE" in issues[0]


@pytest.mark.parametrize("claimed, count", [
    ({"rmse": 2.0, "mae": 1.0, "r_squared": 0.9}, 0),
    ({"r_squared": 1.2}, 1),
    ({"rmse": -1.0}, 1),
    ({"rmse": 1.0, "mae": 2.0, "r_squared": 1.5}, 2),
    ({}, 0),
])
def test_consistency_cases(claimed, count):
    assert len(metric_consistency_check(claimed)) == count


# --- properties -------------------------------------------------------------------------

pairs = st.integers(2, 40).flatmap(
    lambda n: st.tuples(st.lists(finite, min_size=n, max_size=n),
                        st.lists(finite, min_size=n, max_size=n)))


@given(pairs)
def test_rmse_at_least_mae(pair):
    p, a = pair
    if np.ptp(a) == 0:
        return
    m = point_metrics(p, a)
    assert m.rmse >= m.mae - 1e-9 * max(1.0, m.mae)
    assert m.r_squared <= 1.0


@given(pairs, st.randoms(use_true_random=False))
def test_reorder_invariance(pair, rnd):
    p, a = pair
    if np.ptp(a) == 0:
        return
    idx = list(range(len(a)))
    rnd.shuffle(idx)
    m1 = point_metrics(p, a)
    m2 = point_metrics(np.asarray(p)[idx], np.asarray(a)[idx])
    for k in ("rmse", "mae", "r_squared"):
        assert getattr(m2, k) == pytest.approx(getattr(m1, k), rel=1e-9, abs=1e-9)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=40),
       st.floats(0.1, 10), st.floats(-50, 50))
@settings(max_examples=100)
def test_r2_equals_r_squared_for_least_squares_fit(x, slope, intercept):
    # For the OLS fit of actual on x, R^2 equals the squared Pearson r.
    x = np.asarray(x)
    if np.ptp(x) < 1e-3:
        return
    noise = np.sin(np.arange(x.size) * 1.7)
    a = slope * x + intercept + noise
    if np.ptp(a) < 1e-6:
        return
    A = np.column_stack([x, np.ones_like(x)])
    fit = A @ np.linalg.lstsq(A, a, rcond=None)[0]
    m = point_metrics(fit, a)
    assert m.r_squared == pytest.approx(pearson_r(x, a) ** 2, rel=1e-6, abs=1e-9)
