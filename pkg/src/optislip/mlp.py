"""Fully connected ReLU regressor in plain numpy: init, forward, backprop, SGD, persistence."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import SplitData
from .sensing import DEFAULT_WINDOW, SlipMuPair, WindowBuffer
from .vehicle import SETPOINT_BOUNDS

DEFAULT_DIMS = (2 * DEFAULT_WINDOW, 250, 250, 1)
FORMAT_VERSION = 1
DEFAULT_HOLD = 0.10


class ModelFormatError(ValueError):
    """Model file does not describe a consistent network."""


class TrainingError(RuntimeError):
    """Training diverged."""


@dataclass
class MlpModel:
    """``weights[l]`` has shape ``(dims[l+1], dims[l])``; hidden layers use ReLU, the output is linear."""

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ModelFormatError("need one bias vector per weight matrix")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ModelFormatError(f"layer {l}: weight {w.shape} and bias {b.shape} disagree")
            if l and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ModelFormatError(f"layer {l}: input width {w.shape[1]} does not chain")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ModelFormatError(f"layer {l}: non-finite parameters")

    @property
    def dims(self) -> tuple:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def params(self):
        return self.weights + self.biases


def init_model(dims=DEFAULT_DIMS, seed=0) -> MlpModel:
    """He initialization: weights ~ N(0, 2/fan_in), zero biases."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"invalid layer dims {dims}")
    rng = np.random.default_rng(seed)
    weights = [rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_out, fan_in)) for fan_in, fan_out in zip(dims, dims[1:])]
    return MlpModel(weights, [np.zeros(d) for d in dims[1:]])


def _check_input(model: MlpModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dims[0] or x.ndim > 2:
        raise ValueError(f"expected input width {model.dims[0]}, got shape {x.shape}")
    return x


def _activations(model: MlpModel, x: np.ndarray):
    """Pre-activations per layer and the input to each layer, for a batch ``x``."""
    inputs, pre = [x], []
    h = x
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = z if l == last else np.maximum(z, 0.0)
        inputs.append(h)
    return pre, inputs


def forward(model: MlpModel, features) -> np.ndarray | float:
    """Prediction for one window (returns float) or a batch of windows (returns 1-D array)."""
    x = _check_input(model, features)
    single = x.ndim == 1
    h = x[None, :] if single else x
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w.T + b
        if l != last:
            np.maximum(h, 0.0, out=h)
    out = h[:, 0]
    return float(out[0]) if single else out


def predict(model: MlpModel, features, chunk: int = 8192) -> np.ndarray:
    x = _check_input(model, features)
    if x.ndim == 1:
        x = x[None, :]
    return np.concatenate([forward(model, x[i:i + chunk]) for i in range(0, len(x), chunk)] or [np.zeros(0)])


@dataclass
class Gradients:
    weights: list
    biases: list

    def scaled(self, factor: float) -> "Gradients":
        return Gradients([g * factor for g in self.weights], [g * factor for g in self.biases])


def backward(model: MlpModel, features, target) -> Gradients:
    """Exact gradient of ``0.5*(yhat - y)**2`` averaged over the batch."""
    x = _check_input(model, features)
    if x.ndim == 1:
        x = x[None, :]
    y = np.atleast_1d(np.asarray(target, dtype=float))
    pre, inputs = _activations(model, x)
    delta = (inputs[-1][:, 0] - y)[:, None] / len(x)
    gw, gb = [None] * len(model.weights), [None] * len(model.weights)
    for l in range(len(model.weights) - 1, -1, -1):
        gw[l] = delta.T @ inputs[l]
        gb[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ model.weights[l]) * (pre[l - 1] > 0)
    return Gradients(gw, gb)


def loss(model: MlpModel, features, target) -> float:
    """Mean of ``0.5*(yhat - y)**2``."""
    r = np.atleast_1d(forward(model, features)) - np.atleast_1d(target)
    return 0.5 * float(np.mean(r**2))


def evaluate_rmse(model: MlpModel, samples) -> float:
    """RMSE over a :class:`SplitData` or a ``(features, labels)`` pair."""
    feats, labels = (samples.features, samples.labels) if isinstance(samples, SplitData) else samples
    labels = np.asarray(labels, dtype=float)
    if labels.size == 0:
        raise ValueError("cannot compute RMSE of an empty sample set")
    return float(np.sqrt(np.mean((predict(model, feats) - labels) ** 2)))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 40
    batch_size: int = 32
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class TrainReport:
    model: MlpModel
    initial_train_mse: float
    train_mse: list = field(default_factory=list)
    val_rmse: list = field(default_factory=list)
    best_epoch: int = 0


def sgd_step(model: MlpModel, grads: Gradients, lr: float) -> None:
    for p, g in zip(model.params(), grads.weights + grads.biases):
        p -= lr * g


def _mse(model, data: SplitData) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.mean((predict(model, data.features) - data.labels) ** 2))


def train(model: MlpModel, train_data: SplitData, validation: SplitData | None = None,
          config: TrainConfig = TrainConfig(), progress=None) -> TrainReport:
    """Minibatch SGD on the train split; returns the epoch with the best validation RMSE.

    ``model`` is updated in place. Without a validation split the last epoch wins.
    ``progress(epoch, train_mse, val_rmse)`` is called after every epoch when given.
    """
    n = len(train_data)
    if n == 0:
        raise ValueError("training split is empty")
    x, y = train_data.features, train_data.labels
    rng = np.random.default_rng(config.seed)
    report = TrainReport(model, _mse(model, train_data))
    best = math.inf
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            sgd_step(model, backward(model, x[idx], y[idx]), config.learning_rate)
        mse = _mse(model, train_data)
        if not math.isfinite(mse):
            raise TrainingError(f"training diverged at epoch {epoch} (train MSE {mse})")
        report.train_mse.append(mse)
        score = evaluate_rmse(model, validation) if validation is not None and len(validation) else math.sqrt(mse)
        report.val_rmse.append(score if validation is not None and len(validation) else math.nan)
        if score < best or validation is None or not len(validation):
            best, report.best_epoch, report.model = score, epoch, model.copy()
        if progress is not None:
            progress(epoch, mse, report.val_rmse[-1])
    return report


def save_model(model: MlpModel, path) -> None:
    doc = {
        "dims": list(model.dims),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "format_version": FORMAT_VERSION,
    }
    Path(path).write_text(json.dumps(doc))


def load_model(path) -> MlpModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from None
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format_version {doc.get('format_version')!r}")
    try:
        dims = [int(d) for d in doc["dims"]]
        weights = [np.array(w, dtype=float) for w in doc["weights"]]
        biases = [np.array(b, dtype=float) for b in doc["biases"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model ({exc})") from None
    expected = [(o, i) for i, o in zip(dims, dims[1:])]
    if [w.shape for w in weights] != expected:
        raise ModelFormatError(f"{path}: weight shapes {[w.shape for w in weights]} do not match dims {dims}")
    return MlpModel(weights, biases)


class MlpEstimator:
    """Online optimal-slip estimator: buffers pairs and runs the network on each full window."""

    name = "MLP"

    def __init__(self, model: MlpModel, window: int | None = None, hold: float = DEFAULT_HOLD,
                 bounds=SETPOINT_BOUNDS):
        self.model = model
        self.window = window or model.dims[0] // 2
        if 2 * self.window != model.dims[0]:
            raise ValueError(f"window {self.window} does not match model input width {model.dims[0]}")
        self.hold = hold
        self.bounds = bounds
        self.buffer = WindowBuffer(self.window)
        self.estimate = hold

    def reset(self):
        self.buffer.clear()
        self.estimate = self.hold

    def update(self, pair: SlipMuPair) -> float:
        window = self.buffer.push(pair)
        if window is not None:
            self.estimate = float(np.clip(forward(self.model, window), *self.bounds))
        return self.estimate
