"""Lag-window datasets, random train/validation/test division and
Levenberg-Marquardt training with validation-based early stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields

import numpy as np

from .network import NarNetwork, NormParams, jacobian, minmax_normalize
from .resample import WeeklySeries

log = logging.getLogger(__name__)

SUBSETS = ("train", "validation", "test")


class TrainingError(RuntimeError):
    """Training could not proceed (degenerate data or non-finite loss)."""


@dataclass(frozen=True, eq=False)
class LagDataset:
    """Normalized lag windows: ``inputs[i]`` holds the ``d`` values before ``targets[i]``."""

    inputs: np.ndarray
    targets: np.ndarray
    source_scale: NormParams

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def delays(self) -> int:
        return self.inputs.shape[1]


def build_lag_dataset(series, d: int, norm: NormParams | None = None) -> LagDataset:
    """Window a weekly series (or raw array) into ``len - d`` samples.

    Normalization bounds default to the min/max of the whole series.
    """
    values = series.values if isinstance(series, WeeklySeries) else np.asarray(series, dtype=np.float64)
    if d < 1:
        raise ValueError(f"lag count must be >= 1, got {d}")
    if len(values) <= d:
        raise ValueError(f"series of length {len(values)} too short for {d} lags")
    scaled, norm = minmax_normalize(values, norm)
    n = len(values) - d
    X = np.lib.stride_tricks.sliding_window_view(scaled, d)[:n].copy()
    return LagDataset(X, scaled[d:].copy(), norm)


@dataclass(frozen=True, eq=False)
class SplitAssignment:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)

    def subset(self, name: str) -> np.ndarray:
        return getattr(self, name)


def _check_ratios(ratios) -> tuple[float, float, float]:
    r = tuple(float(x) for x in ratios)
    if len(r) != 3 or any(x <= 0 for x in r) or abs(sum(r) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    return r


def split_sizes(n: int, ratios=(0.70, 0.15, 0.15)) -> tuple[int, int, int]:
    """Largest-remainder apportionment of ``n`` samples.

    Larger fractional parts win leftover units; ties go train, validation, test.
    """
    r = _check_ratios(ratios)
    quotas = [x * n for x in r]
    sizes = [int(np.floor(q + 1e-9)) for q in quotas]
    # round so that float noise in e.g. 0.15 * 104 cannot break ties
    frac = [round(q - s, 9) for q, s in zip(quotas, sizes)]
    order = sorted(range(3), key=lambda i: (-frac[i], i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return tuple(sizes)


def random_split(n: int, ratios=(0.70, 0.15, 0.15), seed: int = 0) -> SplitAssignment:
    if n < 3:
        raise ValueError(f"need at least 3 samples to split, got {n}")
    a, b, c = split_sizes(n, ratios)
    if min(a, b, c) == 0:
        raise ValueError(f"{n} samples leave an empty subset under ratios {ratios}")
    perm = np.random.default_rng(seed).permutation(n)
    return SplitAssignment(np.sort(perm[:a]), np.sort(perm[a:a + b]), np.sort(perm[a + b:]))


@dataclass(frozen=True)
class TrainingConfig:
    ratios: tuple = (0.70, 0.15, 0.15)
    seed: int = 1
    max_epochs: int = 1000
    patience: int = 6
    lm_lambda0: float = 1e-3
    lm_lambda_factor: float = 10.0
    lm_lambda_max: float = 1e10

    def __post_init__(self):
        object.__setattr__(self, "ratios", _check_ratios(self.ratios))
        if self.patience < 1 or self.max_epochs < 1:
            raise ValueError("patience and max_epochs must be >= 1")
        if self.lm_lambda0 <= 0 or self.lm_lambda_factor <= 1 or self.lm_lambda_max <= self.lm_lambda0:
            raise ValueError("invalid damping schedule")

    @classmethod
    def from_mapping(cls, values: dict) -> TrainingConfig:
        """Build from string or typed values, e.g. parsed from a config file."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown training option {key!r}")
            if key == "ratios":
                kwargs[key] = parse_ratios(raw) if isinstance(raw, str) else tuple(raw)
            elif key in ("seed", "max_epochs", "patience"):
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
        return cls(**kwargs)


def parse_ratios(text: str) -> tuple[float, float, float]:
    return _check_ratios(float(x) for x in text.split(","))


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


@dataclass
class TrainingReport:
    epochs_run: int
    stop_reason: str
    best_epoch: int
    mse: dict
    pearson_r: dict
    train_mse_history: list = field(default_factory=list)
    val_mse_history: list = field(default_factory=list)
    lambda_history: list = field(default_factory=list)


def lm_step(J: np.ndarray, e: np.ndarray, lam: float) -> np.ndarray:
    """Damped Gauss-Newton step ``-(J'J + lam I)^-1 J'e`` for residuals ``e``."""
    A = J.T @ J
    A[np.diag_indices_from(A)] += lam
    g = J.T @ e
    try:
        return -np.linalg.solve(A, g)
    except np.linalg.LinAlgError:
        return -np.linalg.lstsq(A, g, rcond=None)[0]


def _mse(net: NarNetwork, X, y) -> float:
    if len(y) == 0:
        return float("nan")
    r = net.predict(X) - y
    return float(np.mean(r * r))


def _pearson(a, b) -> float:
    if len(a) < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def evaluate_subsets(net: NarNetwork, ds: LagDataset, split: SplitAssignment):
    """Per-subset (and ``all``) MSE and Pearson R in normalized units."""
    mse, r = {}, {}
    groups = {name: split.subset(name) for name in SUBSETS}
    groups["all"] = np.arange(len(ds))
    for name, idx in groups.items():
        X, y = ds.inputs[idx], ds.targets[idx]
        mse[name] = _mse(net, X, y)
        r[name] = _pearson(net.predict(X), y) if len(idx) else float("nan")
    return mse, r


def train_levenberg_marquardt(ds: LagDataset, split: SplitAssignment, cfg: TrainingConfig,
                              net0: NarNetwork) -> tuple[NarNetwork, TrainingReport]:
    """Full-batch Levenberg-Marquardt on the training SSE with early stopping.

    Each epoch takes one accepted step (damping divided by
    ``lm_lambda_factor``) after as many rejected trials as needed (damping
    multiplied). The parameters with the lowest validation MSE seen so far,
    including the initial ones, are returned.

    Stop reasons: ``patience`` (validation MSE rose on ``cfg.patience``
    consecutive epochs), ``max_epochs``, ``lambda_overflow`` (no step reduces
    training SSE before damping exceeds ``lm_lambda_max``) and
    ``gradient_tolerance`` (gradient norm below 1e-10).
    """
    if net0.delays != ds.delays:
        raise ValueError(f"network expects {net0.delays} lags, dataset has {ds.delays}")
    if not net0.differentiable:
        raise ValueError("cannot train a network with unit-step activations")
    if len(split.train) == 0 or len(split.validation) == 0:
        raise TrainingError("training and validation subsets must be nonempty")
    if np.ptp(ds.targets[split.train]) == 0:
        raise TrainingError("training targets are constant")

    Xt, yt = ds.inputs[split.train], ds.targets[split.train]
    Xv, yv = ds.inputs[split.validation], ds.targets[split.validation]

    net = net0.with_norm(ds.source_scale)
    theta = net.parameters()
    out, J = jacobian(net, Xt)
    e = out - yt
    sse = float(e @ e)
    val = _mse(net, Xv, yv)
    if not (np.isfinite(sse) and np.isfinite(val)):
        raise TrainingError("non-finite loss at initialization")

    best_theta, best_val, best_epoch = theta.copy(), val, 0
    train_hist, val_hist, lam_hist = [sse / len(yt)], [val], []
    lam = cfg.lm_lambda0
    rises = 0
    stop = "max_epochs"
    epoch = 0

    while epoch < cfg.max_epochs:
        g = J.T @ e
        if np.linalg.norm(g) < 1e-10:
            stop = "gradient_tolerance"
            break
        accepted = False
        while lam <= cfg.lm_lambda_max:
            cand = theta + lm_step(J, e, lam)
            cand_net = net.with_parameters(cand) if np.all(np.isfinite(cand)) else None
            if cand_net is not None:
                cand_out, cand_J = jacobian(cand_net, Xt)
                cand_e = cand_out - yt
                cand_sse = float(cand_e @ cand_e)
                if cand_sse < sse:
                    theta, net, J, e, sse = cand, cand_net, cand_J, cand_e, cand_sse
                    lam = max(lam / cfg.lm_lambda_factor, 1e-20)
                    accepted = True
                    break
            lam *= cfg.lm_lambda_factor
        if not accepted:
            stop = "lambda_overflow"
            break

        epoch += 1
        val_new = _mse(net, Xv, yv)
        if not np.isfinite(val_new):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        rises = rises + 1 if val_new > val_hist[-1] else 0
        train_hist.append(sse / len(yt))
        val_hist.append(val_new)
        lam_hist.append(lam)
        if val_new < best_val:
            best_theta, best_val, best_epoch = theta.copy(), val_new, epoch
        if rises >= cfg.patience:
            stop = "patience"
            break

    best = net.with_parameters(best_theta)
    mse, r = evaluate_subsets(best, ds, split)
    log.info("LM stopped after %d epochs (%s); best epoch %d, val MSE %.6g",
             epoch, stop, best_epoch, best_val)
    report = TrainingReport(
        epochs_run=epoch, stop_reason=stop, best_epoch=best_epoch, mse=mse, pearson_r=r,
        train_mse_history=train_hist, val_mse_history=val_hist, lambda_history=lam_hist,
    )
    return best, report
