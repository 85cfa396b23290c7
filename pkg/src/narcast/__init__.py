"""Nonlinear autoregressive neural-network forecasting of monthly incidence
counts via ISO-week resampling."""

from ._kernels import BACKEND
from .forecaster import (ForecastResult, assemble_forecast, closed_loop_forecast,
                         horizon_weeks)
from .metrics import (AcfReport, MetricsReport, metric_consistency_check, pearson_r,
                      point_metrics, residual_autocorrelation)
from .network import (Activation, NarNetwork, NormParams, forward, init_network,
                      minmax_normalize, parameter_gradient)
from .pipeline import PipelineConfig, run_pipeline
from .report import (ComparisonTable, Sdg3Report, comparison_table, emit_outputs,
                     percentage_change, sdg3_assess)
from .resample import IsoWeek, WeeklySeries, iso_week_bins, monthly_to_weekly, weekly_to_monthly
from .series import (CumulativeSeries, MonthlySeries, MonthPeriod, SeriesError,
                     cumulative_from_incident, incident_from_cumulative, month_index,
                     parse_monthly_csv)
from .trainer import (LagDataset, SplitAssignment, TrainingConfig, TrainingReport,
                      build_lag_dataset, random_split, train_levenberg_marquardt)

__version__ = "0.1.0"
