"""Before/after refit comparison on a single window, a sliding window, and a scan over r."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .correction import CorrectionOptions, canonical_kind, fit_correction
from .models import (
    BaseModel,
    FitConfig,
    FitError,
    canonical_family,
    delta_theta,
    fit,
    fit_ar2_robust,
)
from .timeseries import InsufficientDataError, TimeSeries, WindowConfig, slice_series

# errors that mark a single anchor / window size as failed without aborting a sweep
RECOVERABLE = (FitError, InsufficientDataError, ValueError, ArithmeticError, np.linalg.LinAlgError)


@dataclass(frozen=True, eq=False)
class BapcResult:
    theta0: BaseModel
    theta_r: BaseModel
    delta_theta: np.ndarray
    residuals: TimeSeries
    correction: Optional[TimeSeries]
    modified_series: TimeSeries
    window: WindowConfig
    base_family: str
    correction_kind: str
    correction_metadata: dict = field(default_factory=dict)
    removed_step1: frozenset = frozenset()
    removed_step3: frozenset = frozenset()

    @property
    def parameter_names(self) -> tuple:
        return self.theta0.free_names

    @property
    def first_index(self) -> int:
        return self.modified_series.start_index

    @property
    def anchor(self) -> int:
        return self.modified_series.end_index

    def surrogate(self, t):
        return surrogate_correction(self, t)

    def to_json_dict(self) -> dict:
        return {
            "base_family": self.base_family,
            "correction": self.correction_metadata,
            "window": {"n": self.window.n, "r": self.window.r,
                       "first": self.first_index, "last": self.anchor},
            "parameters": list(self.parameter_names),
            "theta0": self.theta0.to_json_dict(),
            "theta_r": self.theta_r.to_json_dict(),
            "delta_theta": [float(v) for v in self.delta_theta],
            "removed_indices_step1": sorted(self.removed_step1),
            "removed_indices": sorted(self.removed_step3),
        }


def _fit_base(family, series, cfg, warm):
    if family == "ar2" and cfg.robust:
        return fit_ar2_robust(series, cfg)
    return fit(family, series, cfg, warm_starts=warm), frozenset()


def bapc(series: TimeSeries, base_family: str, correction_kind: str, window: WindowConfig,
         fit_config: Optional[FitConfig] = None,
         correction_options: Optional[CorrectionOptions] = None) -> BapcResult:
    """Fit, correct the last ``r`` values, refit, and compare parameters.

    The refit starts from the original parameters in addition to the
    usual starting points. With ``r = 0`` nothing is refitted and both
    parameter sets coincide.
    """
    family = canonical_family(base_family)
    kind = canonical_kind(correction_kind)
    cfg = fit_config or FitConfig()
    opts = correction_options or CorrectionOptions()
    if series.n != window.n:
        raise ValueError(f"series has {series.n} values but the window expects {window.n}")
    r = window.r

    theta0, removed0 = _fit_base(family, series, cfg, ())
    fitted = np.asarray(theta0(series.index), dtype=float)
    residuals = series.with_values(series.values - fitted)
    model = fit_correction(kind, residuals, opts)

    if r == 0:
        return BapcResult(theta0, theta0, np.zeros(len(theta0.free_names)), residuals, None,
                          series, window, family, kind, model.metadata(), removed0, removed0)

    first = series.end_index - r + 1
    if kind == "arnet" and first - opts.order < series.start_index:
        raise InsufficientDataError(
            f"correction window r={r} reaches into the first {opts.order} values, which lack lags"
        )
    eps_hat = np.array([model.predict(t, residuals) for t in range(first, series.end_index + 1)])
    values = series.values.copy()
    values[-r:] -= eps_hat
    modified = series.with_values(values)
    theta_r, removed_r = _fit_base(family, modified, cfg, (theta0,))
    if family == "ar2":
        # starting values always come from the observed series
        theta_r = BaseModel("ar2", theta0.params[:2] + theta_r.params[2:], origin=theta0.origin)
    correction = TimeSeries(eps_hat, first)
    return BapcResult(theta0, theta_r, delta_theta(theta0, theta_r), residuals, correction,
                      modified, window, family, kind, model.metadata(), removed0, removed_r)


def surrogate_correction(result: BapcResult, t):
    """``f_theta0(t) - f_theta_r(t)``."""
    return result.theta0(t) - result.theta_r(t)


@dataclass(frozen=True, eq=False)
class SbapcResult:
    """Per-anchor results of a sliding-window run.

    ``matrix[i, j]`` is the surrogate correction of anchor ``anchors[i]``
    at ``t = anchors[i] - n + 1 + j``; failed anchors are NaN rows with
    the reason in ``errors``.
    """

    anchors: tuple
    results: tuple
    matrix: np.ndarray
    n: int
    r: int
    errors: dict

    def row_times(self, s: int) -> np.ndarray:
        return np.arange(s - self.n + 1, s + 1)

    def result_for(self, s: int) -> Optional[BapcResult]:
        return self.results[self.anchors.index(s)]

    def cells(self):
        """Yield ``(s, t, delta_f)`` in anchor-major order."""
        for i, s in enumerate(self.anchors):
            for j, t in enumerate(self.row_times(s)):
                yield s, int(t), float(self.matrix[i, j])


def _anchor_job(args):
    series, s, n, r, family, kind, cfg, opts = args
    try:
        res = bapc(slice_series(series, s - n + 1, s), family, kind, WindowConfig(n, r), cfg, opts)
    except RECOVERABLE as exc:
        return None, f"{type(exc).__name__}: {exc}"
    return res, None


def _run(jobs, fn, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [fn(j) for j in jobs]


def sbapc(series: TimeSeries, n: int, r: int, base_family: str, correction_kind: str,
          fit_config: Optional[FitConfig] = None,
          correction_options: Optional[CorrectionOptions] = None,
          workers: Optional[int] = None) -> SbapcResult:
    """Run :func:`bapc` on every window ``[s - n + 1, s]`` of ``series``."""
    WindowConfig(n, r)
    if n > series.n:
        raise ValueError(f"window size {n} exceeds the series length {series.n}")
    family = canonical_family(base_family)
    kind = canonical_kind(correction_kind)
    cfg = fit_config or FitConfig()
    opts = correction_options or CorrectionOptions()
    anchors = tuple(range(series.start_index + n - 1, series.end_index + 1))
    jobs = [(series, s, n, r, family, kind, cfg, opts) for s in anchors]
    outcomes = _run(jobs, _anchor_job, workers)
    matrix = np.full((len(anchors), n), np.nan)
    results, errors = [], {}
    for i, (s, (res, err)) in enumerate(zip(anchors, outcomes)):
        results.append(res)
        if res is None:
            errors[s] = err
            continue
        ts = np.arange(s - n + 1, s + 1, dtype=float)
        matrix[i] = np.asarray(res.theta0(ts)) - np.asarray(res.theta_r(ts))
    matrix.setflags(write=False)
    return SbapcResult(anchors, tuple(results), matrix, n, r, errors)


@dataclass(frozen=True, eq=False)
class WindowScanResult:
    r_values: tuple
    values: np.ndarray
    t_eval: int
    errors: dict

    @property
    def argmax_r(self) -> Optional[int]:
        mag = np.abs(self.values)
        if not np.any(np.isfinite(mag)):
            return None
        return self.r_values[int(np.nanargmax(mag))]

    def entries(self):
        return list(zip(self.r_values, (float(v) for v in self.values)))


def _scan_job(args):
    series, r, family, kind, t_eval, cfg, opts = args
    try:
        res = bapc(series, family, kind, WindowConfig(series.n, r), cfg, opts)
        return float(surrogate_correction(res, t_eval)), None
    except RECOVERABLE as exc:
        return math.nan, f"{type(exc).__name__}: {exc}"


def window_scan(series: TimeSeries, base_family: str, correction_kind: str, t_eval: int,
                fit_config: Optional[FitConfig] = None,
                correction_options: Optional[CorrectionOptions] = None,
                workers: Optional[int] = None, r_values=None) -> WindowScanResult:
    """Surrogate correction at ``t_eval`` for every correction window size ``r = 0..n``."""
    if not series.start_index <= t_eval <= series.end_index:
        raise IndexError(f"t_eval={t_eval} outside the series")
    family = canonical_family(base_family)
    kind = canonical_kind(correction_kind)
    cfg = fit_config or FitConfig()
    opts = correction_options or CorrectionOptions()
    rs = tuple(range(series.n + 1)) if r_values is None else tuple(int(r) for r in r_values)
    outcomes = _run([(series, r, family, kind, t_eval, cfg, opts) for r in rs], _scan_job, workers)
    values = np.array([v for v, _ in outcomes])
    errors = {r: e for r, (_, e) in zip(rs, outcomes) if e is not None}
    return WindowScanResult(rs, values, int(t_eval), errors)
