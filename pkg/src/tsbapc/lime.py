"""Segment-masking LIME for autoregressive correction models."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .timeseries import InsufficientDataError, TimeSeries


class InsufficientSamplesError(ValueError):
    """Fewer perturbation samples than regression unknowns."""


@dataclass(frozen=True, eq=False)
class LimeExplanation:
    t: int
    coefficients: np.ndarray
    intercept: float
    num_samples: int
    segment_size: int
    seed: int
    placeholder: float
    ridge: float

    def metadata(self) -> dict:
        return {
            "t": self.t,
            "order": int(self.coefficients.size),
            "num_samples": self.num_samples,
            "segment_size": self.segment_size,
            "seed": self.seed,
            "placeholder": self.placeholder,
            "ridge": self.ridge,
            "intercept": self.intercept,
            "kernel": "none",
        }


def segments(p: int, size: int):
    """Contiguous lag segments ``[start, stop)``; the last may be shorter."""
    return [(lo, min(lo + size, p)) for lo in range(0, p, size)]


def lime_explain(model, residuals: TimeSeries, t: int, p: Optional[int] = None,
                 segment_size: int = 3, k: int = 1000, seed: int = 0, ridge: float = 1e-3,
                 placeholder: Optional[float] = None) -> LimeExplanation:
    """Explain ``model`` at index ``t`` by masking segments of its lag vector.

    Each of ``k`` samples switches every segment off with probability 1/2,
    replacing its lags by ``placeholder`` (default: mean residual). A ridge
    regression of the model outputs on the per-segment lag sums, with an
    unpenalised intercept, gives one coefficient per segment, which every
    lag in that segment inherits.
    """
    p = int(p if p is not None else model.order)
    if getattr(model, "order", p) != p:
        raise ValueError(f"model order {model.order} differs from p={p}")
    if not hasattr(model, "predict_lags"):
        raise TypeError("LIME needs a correction model that maps lag vectors to predictions")
    if segment_size < 1:
        raise ValueError("segment_size must be positive")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    t = int(t)
    if t - p < residuals.start_index or t - 1 > residuals.end_index:
        raise InsufficientDataError(f"index {t} lacks {p} lagged residuals")
    segs = segments(p, segment_size)
    if k < len(segs) + 1:
        raise InsufficientSamplesError(f"need at least {len(segs) + 1} samples for {len(segs)} segments")
    fill = float(np.mean(residuals.values)) if placeholder is None else float(placeholder)
    lo = t - p - residuals.start_index
    x = residuals.values[lo : lo + p][::-1]

    rng = np.random.default_rng(seed)
    masked = rng.random((k, len(segs))) < 0.5
    lag_mask = np.zeros((k, p), dtype=bool)
    for j, (a, b) in enumerate(segs):
        lag_mask[:, a:b] = masked[:, [j]]
    X = np.where(lag_mask, fill, x)
    y = np.asarray(model.predict_lags(X), dtype=float)
    Z = np.column_stack([X[:, a:b].sum(axis=1) for a, b in segs])

    zm, ym = Z.mean(axis=0), y.mean()
    Zc, yc = Z - zm, y - ym
    A = Zc.T @ Zc + ridge * np.eye(len(segs))
    coef = np.linalg.solve(A, Zc.T @ yc)
    per_lag = np.empty(p)
    for c, (a, b) in zip(coef, segs):
        per_lag[a:b] = c
    per_lag.setflags(write=False)
    return LimeExplanation(t, per_lag, float(ym - zm @ coef), int(k), int(segment_size), int(seed), fill, float(ridge))
