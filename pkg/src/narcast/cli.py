"""Command-line entry point: ``narcast <verb> [options]``.

Exit codes: 0 success, 1 input error, 2 training or forecast failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import network
from .forecaster import ForecastError, forecast_to_csv
from .metrics import metric_consistency_check, point_metrics, residual_autocorrelation
from .pipeline import AGGREGATE_BEFORE_2020, DEFAULT_HORIZON, PipelineConfig, forecast_after, run_pipeline
from .report import (ANNUAL_BASELINE_CASES, BASELINE_CASES, BASELINE_PERIOD, PUBLISHED,
                     PUBLISHED_METRICS, emit_outputs, sdg3_assess, sdg3_lines)
from .resample import monthly_to_weekly, weekly_to_csv
from .series import MonthPeriod, SeriesError, cumulative_from_incident
from .trainer import (TrainingConfig, TrainingError, build_lag_dataset, random_split,
                      read_config_file, train_levenberg_marquardt)

EXIT_OK, EXIT_INPUT, EXIT_TRAINING, EXIT_IO = 0, 1, 2, 3

_DEFAULTS = TrainingConfig()


class InputError(Exception):
    pass


def _month(text: str) -> MonthPeriod:
    try:
        return MonthPeriod.parse(text)
    except SeriesError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_data(p):
    p.add_argument("--data", default=None,
                   help="monthly CSV with header 'period,cases' (default: bundled 2020-01..2022-02 registry data)")


def _add_model_shape(p):
    p.add_argument("--delays", type=int, default=10, help="feedback delays (default: 10)")
    p.add_argument("--hidden", type=int, default=10, help="hidden neurons (default: 10)")


def _add_training(p):
    p.add_argument("--config", default=None,
                   help="key = value file with training options; explicit flags override it")
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed for init and division (default: {_DEFAULTS.seed})")
    p.add_argument("--ratios", default=None,
                   help="train,validation,test fractions (default: 0.7,0.15,0.15)")
    p.add_argument("--max-epochs", type=int, default=None, help=f"(default: {_DEFAULTS.max_epochs})")
    p.add_argument("--patience", type=int, default=None,
                   help=f"consecutive validation increases before stopping (default: {_DEFAULTS.patience})")
    p.add_argument("--lm-lambda0", type=float, default=None, help=f"(default: {_DEFAULTS.lm_lambda0:g})")
    p.add_argument("--lm-lambda-factor", type=float, default=None, help=f"(default: {_DEFAULTS.lm_lambda_factor:g})")
    p.add_argument("--lm-lambda-max", type=float, default=None, help=f"(default: {_DEFAULTS.lm_lambda_max:g})")


def _add_base(p):
    p.add_argument("--base", type=float, default=AGGREGATE_BEFORE_2020,
                   help=f"aggregate cases before the first month (default: {AGGREGATE_BEFORE_2020})")


def _training_config(args) -> TrainingConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in ("seed", "ratios", "max_epochs", "patience", "lm_lambda0",
                "lm_lambda_factor", "lm_lambda_max"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    return TrainingConfig.from_mapping(values)


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(data=args.data, delays=args.delays, hidden=args.hidden,
                          horizon=getattr(args, "horizon", DEFAULT_HORIZON),
                          base=args.base, training=_training_config(args))


def _write(text: str, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_ingest(args):
    cfg = PipelineConfig(data=args.data, base=args.base)
    s = cfg.load_monthly()
    cum = cumulative_from_incident(s, args.base)
    print(f"months = {len(s)} ({s.origin} .. {s.last})")
    print(f"total_incident = {s.values.sum():g}")
    print(f"aggregate_at_end = {cum.values[-1]:g}")


def cmd_resample(args):
    s = PipelineConfig(data=args.data).load_monthly()
    _write(weekly_to_csv(monthly_to_weekly(s)), args.out)


def cmd_train(args):
    cfg = _pipeline_config(args)
    tc = cfg.training
    weekly = monthly_to_weekly(cfg.load_monthly())
    ds = build_lag_dataset(weekly, cfg.delays)
    split = random_split(len(ds), tc.ratios, tc.seed)
    net0 = network.init_network(cfg.delays, cfg.hidden, tc.seed, norm=ds.source_scale)
    net, rep = train_levenberg_marquardt(ds, split, tc, net0)
    network.save(net, args.model)
    print(f"split = {'/'.join(map(str, split.sizes))}")
    print(f"epochs_run = {rep.epochs_run}; stop_reason = {rep.stop_reason}; best_epoch = {rep.best_epoch}")
    for name in ("train", "validation", "test", "all"):
        print(f"R.{name} = {rep.pearson_r[name]:.5f}; mse.{name} = {rep.mse[name]:.6e}")


def cmd_forecast(args):
    net = network.load(args.model)
    s = PipelineConfig(data=args.data).load_monthly()
    _, result = forecast_after(net, s, monthly_to_weekly(s), args.horizon, args.base)
    _write(forecast_to_csv(result), args.out)


def cmd_evaluate(args):
    if args.published:
        flags = metric_consistency_check(PUBLISHED_METRICS)
        print("published " + ", ".join(f"{k}={v}" for k, v in PUBLISHED_METRICS.items()))
        print(f"violations = {len(flags)}")
        for f in flags:
            print(f"  - {f}")
        if args.model is None:
            return
    if args.model is None:
        raise InputError("evaluate needs --model or --published")
    net = network.load(args.model)
    weekly = monthly_to_weekly(PipelineConfig(data=args.data).load_monthly())
    ds = build_lag_dataset(weekly, net.delays, norm=net.norm)
    fitted = net.norm.denormalize(net.predict(ds.inputs))
    actual = weekly.values[net.delays:]
    m = point_metrics(fitted, actual)
    print("subset,n,rmse,mae,mape,r_squared,pearson_r,mape_excluded")
    print(f"all,{m.n},{m.rmse:.6f},{m.mae:.6f},{m.mape:.6f},{m.r_squared:.6f},{m.pearson_r:.6f},{m.mape_excluded}")
    acf = residual_autocorrelation(actual - fitted, min(args.max_lag, len(actual) - 1))
    outside = int(np.sum(np.abs(acf.coefficients[1:]) > acf.confidence_bound))
    print(f"acf_bound = {acf.confidence_bound:.4f}; lags_outside_bound = {outside}/{len(acf.lags) - 1}")
    flags = metric_consistency_check({"rmse": m.rmse, "mae": m.mae, "mape": m.mape, "r_squared": m.r_squared})
    print(f"violations = {len(flags)}")


def cmd_report(args):
    rep = sdg3_assess(BASELINE_PERIOD, args.baseline, args.target, args.forecast,
                      args.annual_baseline, args.annual_forecast)
    print("\n".join(sdg3_lines(rep, "SDG-3")))


def cmd_pipeline(args):
    run = run_pipeline(_pipeline_config(args))
    for path in emit_outputs(run, args.out):
        print(path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="narcast", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a monthly CSV and print a summary")
    _add_data(p)
    _add_base(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("resample", help="write the ISO-week series as CSV")
    _add_data(p)
    p.add_argument("--out", default="-", help="output path (default: stdout)")
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("train", help="train a model and save it as JSON")
    _add_data(p)
    _add_model_shape(p)
    _add_training(p)
    p.add_argument("--model", required=True, help="output model file")
    p.set_defaults(func=cmd_train, base=AGGREGATE_BEFORE_2020)

    p = sub.add_parser("forecast", help="closed-loop forecast from a saved model")
    _add_data(p)
    _add_base(p)
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--horizon", type=_month, default=DEFAULT_HORIZON, help="last month YYYY-MM (default: 2030-12)")
    p.add_argument("--out", default="-", help="output path (default: stdout)")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("evaluate", help="one-step metrics of a saved model, or audit published metrics")
    _add_data(p)
    p.add_argument("--model", default=None, help="model JSON file")
    p.add_argument("--published", action="store_true", help="check the published metric set")
    p.add_argument("--max-lag", type=int, default=20, help="ACF lags (default: 20)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="SDG-3 assessment for given case counts")
    p.add_argument("--baseline", type=float, default=BASELINE_CASES,
                   help=f"cases in the baseline month (default: {BASELINE_CASES}, {BASELINE_PERIOD})")
    p.add_argument("--forecast", type=float, default=PUBLISHED["forecast_dec_2030"],
                   help=f"forecast cases in the target month (default: {PUBLISHED['forecast_dec_2030']})")
    p.add_argument("--target", type=_month, default=MonthPeriod(2030, 12), help="target month (default: 2030-12)")
    p.add_argument("--annual-baseline", type=float, default=ANNUAL_BASELINE_CASES,
                   help=f"(default: {ANNUAL_BASELINE_CASES})")
    p.add_argument("--annual-forecast", type=float, default=PUBLISHED["forecast_annual_2030"],
                   help=f"(default: {PUBLISHED['forecast_annual_2030']})")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="run everything and write the output file set")
    _add_data(p)
    _add_model_shape(p)
    _add_training(p)
    _add_base(p)
    p.add_argument("--horizon", type=_month, default=DEFAULT_HORIZON, help="last forecast month YYYY-MM (default: 2030-12)")
    p.add_argument("--out", default="narcast-out", help="output directory (default: narcast-out)")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except TrainingError as exc:
        print(f"narcast: training failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except ForecastError as exc:
        print(f"narcast: forecast failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (SeriesError, InputError, network.ModelFormatError) as exc:
        print(f"narcast: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"narcast: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"narcast: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
