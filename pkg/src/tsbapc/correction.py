"""Black-box residual predictors used to correct the base model."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .timeseries import InsufficientDataError, TimeSeries, build_lag_matrix

KINDS = ("nn1", "arnet")

_ALIASES = {
    "nearestneighbor1": "nn1",
    "nearest_neighbor1": "nn1",
    "1nn": "nn1",
    "knn": "nn1",
    "autoregressivenet": "arnet",
    "autoregressive_net": "arnet",
}


def canonical_kind(kind: str) -> str:
    key = kind.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in KINDS:
        raise ValueError(f"unknown correction kind {kind!r}; choose from {list(KINDS)}")
    return key


@dataclass(frozen=True)
class CorrectionOptions:
    """Hyper-parameters of the autoregressive network (ignored by ``nn1``)."""

    order: int = 12
    hidden: int = 16
    epochs: int = 500
    learning_rate: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.order < 1 or self.hidden < 1 or self.epochs < 0:
            raise ValueError("order and hidden must be positive, epochs non-negative")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def to_json_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True, eq=False)
class NearestNeighbor1:
    """Stores every ``(t, eps_t)``; predicts the residual of the closest stored index."""

    positions: tuple
    values: tuple
    kind: str = field(default="nn1", init=False)

    def predict(self, t, history: Optional[TimeSeries] = None) -> float:
        return self.values[kernels.nearest_index(self.positions, float(t))]

    def metadata(self) -> dict:
        return {"kind": self.kind, "size": len(self.positions)}


@dataclass(frozen=True, eq=False)
class AutoregressiveNet:
    """One-hidden-layer tanh network on ``(eps_{t-1}, ..., eps_{t-p})``.

    Inputs and targets are divided by ``scale`` (the training residuals'
    standard deviation) so the fixed learning rate behaves the same for
    any units.
    """

    options: CorrectionOptions
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    scale: float
    final_loss: float
    kind: str = field(default="arnet", init=False)

    @property
    def order(self) -> int:
        return self.options.order

    def predict_lags(self, lags) -> np.ndarray:
        """Network output for one lag vector or a stack of them (most recent first)."""
        x = np.asarray(lags, dtype=float) / self.scale
        h = np.tanh(x @ self.w1 + self.b1)
        return (h @ self.w2 + self.b2) * self.scale

    def predict(self, t, history: Optional[TimeSeries] = None) -> float:
        if history is None:
            raise ValueError("the autoregressive correction needs a residual history")
        t = int(t)
        p = self.order
        if t - p < history.start_index or t - 1 > history.end_index:
            raise InsufficientDataError(f"residual history lacks the {p} lags before t={t}")
        lo = t - p - history.start_index
        lags = history.values[lo : lo + p][::-1]
        return float(self.predict_lags(lags))

    def metadata(self) -> dict:
        return {"kind": self.kind, **self.options.to_json_dict(), "final_loss": self.final_loss}


def _train_arnet(residuals: TimeSeries, opts: CorrectionOptions) -> AutoregressiveNet:
    lm = build_lag_matrix(residuals, opts.order)
    std = float(np.std(residuals.values))
    scale = std if std > 0 else 1.0
    X = lm.lags / scale
    y = lm.targets / scale
    rng = np.random.default_rng(opts.seed)
    w1 = rng.uniform(-0.5, 0.5, size=(opts.order, opts.hidden))
    w2 = rng.uniform(-0.5, 0.5, size=opts.hidden)
    b1 = np.zeros(opts.hidden)
    b2 = 0.0
    m = y.size
    lr = opts.learning_rate
    loss = float("nan")
    for _ in range(opts.epochs):
        h = np.tanh(X @ w1 + b1)
        err = h @ w2 + b2 - y
        loss = float(err @ err) / m
        g_out = 2.0 * err / m
        g_h = np.outer(g_out, w2) * (1.0 - h * h)
        w2 = w2 - lr * (h.T @ g_out)
        b2 = b2 - lr * float(g_out.sum())
        w1 = w1 - lr * (X.T @ g_h)
        b1 = b1 - lr * g_h.sum(axis=0)
    if opts.epochs:
        err = np.tanh(X @ w1 + b1) @ w2 + b2 - y
        loss = float(err @ err) / m
    for arr in (w1, b1, w2):
        arr.setflags(write=False)
    return AutoregressiveNet(opts, w1, b1, w2, b2, scale, loss)


def fit_correction(kind: str, residuals: TimeSeries, options: Optional[CorrectionOptions] = None):
    """Fit a correction model of ``kind`` (``"nn1"`` or ``"arnet"``) to the residual series."""
    kind = canonical_kind(kind)
    if kind == "nn1":
        return NearestNeighbor1(
            tuple(float(t) for t in residuals.index), tuple(float(v) for v in residuals.values)
        )
    opts = options or CorrectionOptions()
    if residuals.n <= opts.order:
        raise InsufficientDataError(
            f"autoregressive correction of order {opts.order} needs more than {opts.order} residuals"
        )
    return _train_arnet(residuals, opts)


def predict_correction(model, t, history: Optional[TimeSeries] = None) -> float:
    """``eps_hat(t)``; the network variant uses the true lagged residuals in ``history``."""
    return model.predict(t, history)


@dataclass(frozen=True, eq=False)
class LinearAutoregressor:
    """Fixed linear map ``eps_hat_t = w . (eps_{t-1}, ..., eps_{t-p})``; handy as a known ground truth."""

    weights: tuple
    kind: str = field(default="linear", init=False)

    @property
    def order(self) -> int:
        return len(self.weights)

    def predict_lags(self, lags) -> np.ndarray:
        return np.asarray(lags, dtype=float) @ np.asarray(self.weights, dtype=float)

    def predict(self, t, history: Optional[TimeSeries] = None) -> float:
        if history is None:
            raise ValueError("the autoregressive correction needs a residual history")
        t = int(t)
        p = self.order
        if t - p < history.start_index or t - 1 > history.end_index:
            raise InsufficientDataError(f"residual history lacks the {p} lags before t={t}")
        lo = t - p - history.start_index
        return float(self.predict_lags(history.values[lo : lo + p][::-1]))

    def metadata(self) -> dict:
        return {"kind": self.kind, "weights": list(self.weights)}
