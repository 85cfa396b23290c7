"""Single-hidden-layer tapped-delay perceptron for nonlinear autoregression.

The network maps the ``d`` most recent (normalized) values, oldest first, to
the next value::

    y = out_act(sum_k v[k] * hid_act(W[k] @ lags + b[k]) + c)
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised when a persisted model document cannot be loaded."""


class Activation(str, enum.Enum):
    TANH = "tanh"
    LINEAR = "linear"
    STEP = "step"

    @property
    def code(self) -> int:
        return {"tanh": _kernels.TANH, "linear": _kernels.LINEAR, "step": _kernels.STEP}[self.value]

    def __call__(self, a):
        a = np.asarray(a, dtype=np.float64)
        if self is Activation.TANH:
            return np.tanh(a)
        if self is Activation.LINEAR:
            return a
        return np.where(a >= 0.0, 1.0, 0.0)


@dataclass(frozen=True)
class NormParams:
    """Affine map of ``[raw_min, raw_max]`` onto ``[-1, 1]``."""

    raw_min: float
    raw_max: float

    def __post_init__(self):
        lo, hi = float(self.raw_min), float(self.raw_max)
        if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
            raise ValueError(f"degenerate normalization range [{lo}, {hi}]")
        object.__setattr__(self, "raw_min", lo)
        object.__setattr__(self, "raw_max", hi)

    @classmethod
    def from_data(cls, values) -> NormParams:
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            raise ValueError("cannot derive normalization from empty data")
        return cls(float(values.min()), float(values.max()))

    def normalize(self, values):
        x = np.asarray(values, dtype=np.float64)
        return 2.0 * (x - self.raw_min) / (self.raw_max - self.raw_min) - 1.0

    def denormalize(self, values):
        y = np.asarray(values, dtype=np.float64)
        return (y + 1.0) * 0.5 * (self.raw_max - self.raw_min) + self.raw_min


def minmax_normalize(values, params: NormParams | None = None):
    """Scale ``values`` to [-1, 1]; returns ``(scaled, params)``.

    When ``params`` is omitted the bounds come from ``values`` itself, which
    raises ``ValueError`` for constant input.
    """
    if params is None:
        params = NormParams.from_data(values)
    return params.normalize(values), params


def _frozen(a, shape=None):
    a = np.array(a, dtype=np.float64)
    if shape is not None:
        a = a.reshape(shape)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class NarNetwork:
    input_weights: np.ndarray
    hidden_biases: np.ndarray
    output_weights: np.ndarray
    output_bias: float
    hidden_activation: Activation = Activation.TANH
    output_activation: Activation = Activation.LINEAR
    norm: NormParams = field(default_factory=lambda: NormParams(-1.0, 1.0))

    def __post_init__(self):
        W = np.array(self.input_weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
            raise ValueError(f"input_weights must be a nonempty h x d matrix, got shape {W.shape}")
        h, _ = W.shape
        b = np.array(self.hidden_biases, dtype=np.float64).reshape(-1)
        v = np.array(self.output_weights, dtype=np.float64).reshape(-1)
        if b.shape != (h,) or v.shape != (h,):
            raise ValueError("hidden_biases and output_weights must have length h")
        c = float(self.output_bias)
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))
                and np.all(np.isfinite(v)) and np.isfinite(c)):
            raise ValueError("network parameters must be finite")
        object.__setattr__(self, "input_weights", _frozen(W))
        object.__setattr__(self, "hidden_biases", _frozen(b))
        object.__setattr__(self, "output_weights", _frozen(v))
        object.__setattr__(self, "output_bias", c)
        object.__setattr__(self, "hidden_activation", Activation(self.hidden_activation))
        object.__setattr__(self, "output_activation", Activation(self.output_activation))

    @property
    def delays(self) -> int:
        return self.input_weights.shape[1]

    @property
    def hidden(self) -> int:
        return self.input_weights.shape[0]

    @property
    def n_params(self) -> int:
        h, d = self.input_weights.shape
        return h * d + 2 * h + 1

    @property
    def differentiable(self) -> bool:
        return Activation.STEP not in (self.hidden_activation, self.output_activation)

    def parameters(self) -> np.ndarray:
        """Flat copy: input weights (row-major), hidden biases, output weights, output bias."""
        return np.concatenate([
            self.input_weights.ravel(), self.hidden_biases,
            self.output_weights, [self.output_bias],
        ])

    def with_parameters(self, theta) -> NarNetwork:
        theta = np.asarray(theta, dtype=np.float64)
        h, d = self.input_weights.shape
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        hd = h * d
        return replace(
            self,
            input_weights=theta[:hd].reshape(h, d),
            hidden_biases=theta[hd:hd + h],
            output_weights=theta[hd + h:hd + 2 * h],
            output_bias=float(theta[-1]),
        )

    def with_norm(self, norm: NormParams) -> NarNetwork:
        return replace(self, norm=norm)

    def _kernel_args(self):
        return (self.input_weights, self.hidden_biases, self.output_weights,
                self.output_bias)

    def predict(self, X) -> np.ndarray:
        """Forward pass over a batch of normalized lag rows (n x d)."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.delays:
            raise ValueError(f"expected lag rows of width {self.delays}, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite network input")
        return _kernels.forward_batch(*self._kernel_args(), X,
                                      self.hidden_activation.code,
                                      self.output_activation.code)


def init_network(d: int, h: int, seed: int, norm: NormParams | None = None) -> NarNetwork:
    """Uniform[-0.5, 0.5] weights and biases from ``numpy.random.default_rng(seed)``."""
    if d < 1 or h < 1:
        raise ValueError(f"delays and hidden must be >= 1, got d={d}, h={h}")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-0.5, 0.5, size=h * d + 2 * h + 1)
    return NarNetwork(
        input_weights=theta[:h * d].reshape(h, d),
        hidden_biases=theta[h * d:h * d + h],
        output_weights=theta[h * d + h:h * d + 2 * h],
        output_bias=theta[-1],
        norm=norm if norm is not None else NormParams(-1.0, 1.0),
    )


def forward(net: NarNetwork, lags) -> float:
    """Evaluate the network on one window of ``net.delays`` normalized lags."""
    x = np.asarray(lags, dtype=np.float64)
    if x.shape != (net.delays,):
        raise ValueError(f"expected {net.delays} lags, got shape {x.shape}")
    return float(net.predict(x[None, :])[0])


def parameter_gradient(net: NarNetwork, lags, target: float) -> np.ndarray:
    """Gradient of ``0.5 * (forward(net, lags) - target)**2`` w.r.t. ``net.parameters()``."""
    if not net.differentiable:
        raise ValueError("unit-step activation has no usable gradient")
    x = np.asarray(lags, dtype=np.float64)
    if x.shape != (net.delays,):
        raise ValueError(f"expected {net.delays} lags, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite network input")
    y, J = _kernels.jacobian(*net._kernel_args(), np.ascontiguousarray(x[None, :]),
                             net.hidden_activation.code, net.output_activation.code)
    return (y[0] - float(target)) * J[0]


def jacobian(net: NarNetwork, X) -> tuple[np.ndarray, np.ndarray]:
    """Batch outputs and the n x P matrix of output derivatives."""
    if not net.differentiable:
        raise ValueError("unit-step activation has no usable gradient")
    X = np.ascontiguousarray(X, dtype=np.float64)
    return _kernels.jacobian(*net._kernel_args(), X,
                             net.hidden_activation.code, net.output_activation.code)


# --- persistence ---------------------------------------------------------------

def to_document(net: NarNetwork) -> dict:
    return {
        "version": FORMAT_VERSION,
        "delays": net.delays,
        "hidden": net.hidden,
        "input_weights": net.input_weights.ravel().tolist(),
        "hidden_biases": net.hidden_biases.tolist(),
        "output_weights": net.output_weights.tolist(),
        "output_bias": net.output_bias,
        "hidden_activation": net.hidden_activation.value,
        "output_activation": net.output_activation.value,
        "norm": {"raw_min": net.norm.raw_min, "raw_max": net.norm.raw_max},
    }


def from_document(doc: dict) -> NarNetwork:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {doc.get('version')!r}")
    try:
        d, h = int(doc["delays"]), int(doc["hidden"])
        W = np.asarray(doc["input_weights"], dtype=np.float64)
        if W.size != h * d:
            raise ModelFormatError(f"input_weights has {W.size} entries, expected {h * d}")
        return NarNetwork(
            input_weights=W.reshape(h, d),
            hidden_biases=doc["hidden_biases"],
            output_weights=doc["output_weights"],
            output_bias=doc["output_bias"],
            hidden_activation=Activation(doc["hidden_activation"]),
            output_activation=Activation(doc["output_activation"]),
            norm=NormParams(doc["norm"]["raw_min"], doc["norm"]["raw_max"]),
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc


def dumps(net: NarNetwork) -> str:
    return json.dumps(to_document(net), indent=2) + "\n"


def loads(text: str) -> NarNetwork:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    return from_document(doc)


def save(net: NarNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(net))


def load(path) -> NarNetwork:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    return loads(text)
