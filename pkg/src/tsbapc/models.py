"""Interpretable base models ``f_theta(t)`` and their least-squares fits.

Families
--------
constant         ``a``
linear           ``a + b t``
polyseasonal     ``a + b t + c t^2 + alpha cos(2 pi t / P + phi)`` (period ``P`` fixed)
sinusoid         ``alpha cos(omega t + phi)`` (``omega`` fixed)
damped_sinusoid  ``alpha exp(-beta t) cos(omega t + phi)``
ar2              trajectory of ``y_t = phi1 y_{t-1} + phi2 y_{t-2}`` from ``(y1, y2)``

All families are evaluated at absolute series indices. An ``ar2`` model
remembers the absolute index of its first value (``origin``).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import kernels
from .timeseries import InsufficientDataError, TimeSeries

TWO_PI = 2.0 * math.pi

PARAM_NAMES = {
    "constant": ("a",),
    "linear": ("a", "b"),
    "polyseasonal": ("a", "b", "c", "alpha", "phi"),
    "sinusoid": ("alpha", "phi"),
    "damped_sinusoid": ("alpha", "beta", "omega", "phi"),
    "ar2": ("y1", "y2", "phi1", "phi2"),
}

# parameters that move under a refit (AR(2) starting values are observed, not fitted)
FREE_PARAMS = {
    "constant": ("a",),
    "linear": ("a", "b"),
    "polyseasonal": ("a", "b", "c", "alpha", "phi"),
    "sinusoid": ("alpha", "phi"),
    "damped_sinusoid": ("alpha", "beta", "omega", "phi"),
    "ar2": ("phi1", "phi2"),
}

ANGLE_PARAMS = frozenset({"phi"})

_ALIASES = {
    "const": "constant",
    "poly-seasonal": "polyseasonal",
    "poly_seasonal": "polyseasonal",
    "damped-sinusoid": "damped_sinusoid",
    "dampedsinusoid": "damped_sinusoid",
    "sin": "sinusoid",
    "ar2-robust": "ar2",
    "ar2_robust": "ar2",
}

# Closed-form evaluation of the binomial sums is only trusted up to this index.
CLOSED_FORM_MAX_T = 60


class FitError(RuntimeError):
    """The base model could not be fitted."""


class DegenerateFitError(FitError):
    """Outlier removal left too few rows to fit."""


class FitWarning(UserWarning):
    """The optimizer stopped before meeting its convergence criterion."""


def canonical_family(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in PARAM_NAMES:
        raise ValueError(f"unknown base family {name!r}; choose from {sorted(PARAM_NAMES)}")
    return key


def wrap_angle(x):
    """Map an angle difference into ``(-pi, pi]``."""
    y = math.remainder(x, TWO_PI)
    return math.pi if y == -math.pi else y


@dataclass(frozen=True)
class BaseModel:
    """A parametric family tag plus its parameter values (in family order)."""

    family: str
    params: tuple
    period: Optional[float] = None
    omega: Optional[float] = None
    origin: Optional[int] = None
    converged: bool = field(default=True, compare=False)

    def __post_init__(self):
        fam = canonical_family(self.family)
        object.__setattr__(self, "family", fam)
        params = tuple(float(v) for v in self.params)
        if len(params) != len(PARAM_NAMES[fam]):
            raise ValueError(f"{fam} takes {len(PARAM_NAMES[fam])} parameters, got {len(params)}")
        if not all(math.isfinite(v) for v in params):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "params", params)
        if fam == "polyseasonal" and self.period is None:
            object.__setattr__(self, "period", 12.0)
        if fam == "sinusoid" and self.omega is None:
            raise ValueError("the sinusoid family needs a fixed angular frequency 'omega'")
        if fam == "ar2" and self.origin is None:
            object.__setattr__(self, "origin", 1)
        if fam == "damped_sinusoid":
            alpha, _, omega, phi = params
            if alpha <= 0 or omega <= 0 or not 0 <= phi < TWO_PI:
                raise ValueError("damped sinusoid needs alpha > 0, omega > 0, phi in [0, 2pi)")

    # -- parameter access -------------------------------------------------
    @property
    def names(self) -> tuple:
        return PARAM_NAMES[self.family]

    @property
    def free_names(self) -> tuple:
        return FREE_PARAMS[self.family]

    def __getitem__(self, name: str) -> float:
        return self.params[self.names.index(name)]

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.params))

    def free_vector(self) -> np.ndarray:
        return np.array([self[k] for k in self.free_names])

    def with_free(self, values) -> "BaseModel":
        """Copy with the free parameters replaced; angles and signs are not normalised."""
        d = self.as_dict()
        d.update(zip(self.free_names, (float(v) for v in values)))
        return _unchecked(self, tuple(d[k] for k in self.names))

    # -- evaluation -------------------------------------------------------
    def __call__(self, t):
        return evaluate(self, t)

    def gradient(self, t) -> np.ndarray:
        """Partial derivatives of ``f_theta(t)`` w.r.t. the free parameters."""
        return partials(self, t)

    # -- serialisation ----------------------------------------------------
    def to_json_dict(self) -> dict:
        out = {"family": self.family, "params": self.as_dict()}
        if self.period is not None:
            out["period"] = self.period
        if self.omega is not None:
            out["omega"] = self.omega
        if self.origin is not None:
            out["origin"] = self.origin
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, d: dict) -> "BaseModel":
        fam = canonical_family(d["family"])
        params = tuple(d["params"][k] for k in PARAM_NAMES[fam])
        return cls(fam, params, d.get("period"), d.get("omega"), d.get("origin"))

    @classmethod
    def from_json(cls, text: str) -> "BaseModel":
        return cls.from_json_dict(json.loads(text))


def _unchecked(proto: BaseModel, params: tuple) -> BaseModel:
    # path points of an attribution integral may leave the canonical domain
    m = object.__new__(BaseModel)
    for name in ("family", "period", "omega", "origin", "converged"):
        object.__setattr__(m, name, getattr(proto, name))
    object.__setattr__(m, "params", tuple(float(v) for v in params))
    return m


# ---------------------------------------------------------------------------
# AR(2) <-> damped sinusoid, binomial closed form
# ---------------------------------------------------------------------------

def sin_to_ar2(alpha, beta, omega, phi):
    """AR(2) description ``(y1, y2, phi1, phi2)`` of ``alpha e^{-beta(t-1)} cos(omega(t-1) + phi)``."""
    if alpha <= 0 or omega <= 0:
        raise ValueError("alpha and omega must be positive")
    decay = math.exp(-beta)
    y1 = alpha * math.cos(phi)
    y2 = alpha * decay * math.cos(omega + phi)
    return y1, y2, 2.0 * decay * math.cos(omega), -decay * decay


def ar2_to_sin(y1, y2, phi1, phi2):
    """Damped-sinusoid parameters ``(alpha, beta, omega, phi)`` of an AR(2) sequence.

    The phase quadrant is fixed by requiring ``alpha cos(phi) = y1`` and
    ``alpha e^{-beta} cos(omega + phi) = y2`` with ``alpha > 0``.
    """
    if not phi2 < 0:
        raise ValueError("phi2 must be negative for an oscillating AR(2) sequence")
    if y1 == 0 and y2 == 0:
        raise ValueError("degenerate AR(2) sequence: y1 = y2 = 0")
    beta = -0.5 * math.log(-phi2)
    c = 0.5 * phi1 * math.exp(beta)
    if abs(c) > 1.0:
        if abs(c) - 1.0 > 1e-12:
            raise ValueError(f"arccos argument {c!r} outside [-1, 1]")
        c = math.copysign(1.0, c)
    omega = math.acos(c)
    s = math.sin(omega)
    if s == 0.0:
        raise ValueError("omega is 0 or pi; the phase is not identifiable")
    decay = math.exp(-beta)
    cos_part = y1
    sin_part = (y1 * decay * math.cos(omega) - y2) / (decay * s)
    alpha = math.hypot(cos_part, sin_part)
    phi = math.atan2(sin_part, cos_part) % TWO_PI
    if phi >= TWO_PI:
        phi = 0.0
    return alpha, beta, omega, phi


def phi(t, phi1, phi2):
    """``sum_k C(t-k, k) phi1^(t-2k) phi2^k``; recursion beyond ``t = 60``."""
    t = int(t)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t <= CLOSED_FORM_MAX_T:
        return kernels.phi_sum(t, phi1, phi2)
    return kernels.phi_recursion(t, phi1, phi2)


def ar2_closed_form(model: BaseModel, t) -> float:
    """``y_t = Phi_1(t) y2 + Phi_2(t) y1`` at absolute index ``t``."""
    y1, y2, p1, p2 = model.params
    k = _ar2_local(model, t)
    if k == 1:
        return y1
    if k == 2:
        return y2
    return phi(k - 2, p1, p2) * y2 + p2 * phi(k - 3, p1, p2) * y1


def ar2_recursion(model: BaseModel, t) -> float:
    """Same value by unrolling the recursion in plain floating point."""
    y1, y2, p1, p2 = model.params
    return kernels.ar2_value_grad(_ar2_local(model, t), p1, p2, y1, y2)[0]


def _ar2_local(model, t) -> int:
    tf = float(t)
    if not tf.is_integer():
        raise ValueError(f"ar2 models are defined at integer indices only, got {t!r}")
    k = int(tf) - model.origin + 1
    if k < 1:
        raise ValueError(f"index {int(tf)} precedes the model origin {model.origin}")
    return k


# ---------------------------------------------------------------------------
# evaluation and partial derivatives
# ---------------------------------------------------------------------------

def evaluate(model: BaseModel, t):
    """``f_theta(t)`` for scalar or array ``t``."""
    fam = model.family
    p = model.params
    if fam == "ar2":
        if np.ndim(t) == 0:
            return ar2_closed_form(model, t)
        return np.array([ar2_closed_form(model, x) for x in np.asarray(t).ravel()]).reshape(np.shape(t))
    t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
    if fam == "constant":
        out = p[0] + 0.0 * t
    elif fam == "linear":
        out = p[0] + p[1] * t
    elif fam == "polyseasonal":
        a, b, c, alpha, ph = p
        out = a + b * t + c * t * t + alpha * np.cos(TWO_PI * t / model.period + ph)
    elif fam == "sinusoid":
        alpha, ph = p
        out = alpha * np.cos(model.omega * t + ph)
    else:
        alpha, beta, omega, ph = p
        out = alpha * np.exp(-beta * t) * np.cos(omega * t + ph)
    return float(out) if np.ndim(out) == 0 else out


def partials(model: BaseModel, t) -> np.ndarray:
    """Gradient of ``theta -> f_theta(t)`` over the free parameters at scalar ``t``."""
    fam = model.family
    p = model.params
    t = float(t)
    if fam == "constant":
        return np.array([1.0])
    if fam == "linear":
        return np.array([1.0, t])
    if fam == "polyseasonal":
        _, _, _, alpha, ph = p
        arg = TWO_PI * t / model.period + ph
        return np.array([1.0, t, t * t, math.cos(arg), -alpha * math.sin(arg)])
    if fam == "sinusoid":
        alpha, ph = p
        arg = model.omega * t + ph
        return np.array([math.cos(arg), -alpha * math.sin(arg)])
    if fam == "damped_sinusoid":
        alpha, beta, omega, ph = p
        e = math.exp(-beta * t)
        c = math.cos(omega * t + ph)
        s = math.sin(omega * t + ph)
        return np.array([e * c, -t * alpha * e * c, -t * alpha * e * s, -alpha * e * s])
    y1, y2, p1, p2 = p
    _, g1, g2 = kernels.ar2_value_grad(_ar2_local(model, t), p1, p2, y1, y2)
    return np.array([g1, g2])


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitConfig:
    """Optimizer and family settings shared by Step-1 and Step-3 fits.

    ``period`` is the seasonal period of ``polyseasonal``; ``omega`` the fixed
    angular frequency of ``sinusoid``. ``frequency_grid`` seeds the
    multi-start damped-sinusoid fit (default: 16 log-spaced values in
    ``[2 pi / n, pi]``).
    """

    max_iterations: int = 200
    tolerance: float = 1e-12
    frequency_grid: Optional[Sequence[float]] = None
    robust: bool = True
    robust_k: float = 3.0
    robust_rounds: int = 10
    seed: int = 0
    period: float = 12.0
    omega: Optional[float] = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.robust_k > 0:
            raise ValueError("robust_k must be positive")
        if self.frequency_grid is not None:
            grid = tuple(float(w) for w in self.frequency_grid)
            if not grid:
                raise ValueError("frequency_grid must not be empty")
            object.__setattr__(self, "frequency_grid", grid)

    def grid_for(self, n: int) -> tuple:
        if self.frequency_grid is not None:
            return self.frequency_grid
        lo = TWO_PI / max(n, 2)
        return tuple(np.geomspace(lo, math.pi, 16))

    def to_json_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if d["frequency_grid"] is not None:
            d["frequency_grid"] = list(d["frequency_grid"])
        return d


def _linear_lstsq(columns, y, n_params):
    X = np.column_stack(columns)
    if X.shape[0] < n_params:
        raise FitError(f"need at least {n_params} observations, got {X.shape[0]}")
    scale = np.sqrt(np.sum(X * X, axis=0))
    scale[scale == 0] = 1.0
    Xs = X / scale
    coef, _, rank, _ = np.linalg.lstsq(Xs, y, rcond=None)
    if rank < n_params:
        raise FitError("singular design matrix")
    # one step of iterative refinement
    coef = coef + np.linalg.lstsq(Xs, y - Xs @ coef, rcond=None)[0]
    return coef / scale


def _amp_phase(cos_coef, sin_coef):
    # A cos(x) + B sin(x) = alpha cos(x + phi)
    alpha = math.hypot(cos_coef, sin_coef)
    if alpha == 0.0:
        return 0.0, 0.0
    ph = math.atan2(-sin_coef, cos_coef) % TWO_PI
    return alpha, (0.0 if ph >= TWO_PI else ph)


def fit(family: str, series: TimeSeries, config: Optional[FitConfig] = None,
        warm_starts: Sequence[BaseModel] = ()) -> BaseModel:
    """Least-squares fit of ``family`` to ``series``.

    Linear-in-parameter families are solved exactly; ``damped_sinusoid`` is
    the best of several Levenberg-Marquardt runs; ``ar2`` delegates to
    :func:`fit_ar2_robust` (or plain least squares with ``robust=False``).
    """
    fam = canonical_family(family)
    cfg = config or FitConfig()
    t = series.index
    y = series.values
    k = len(PARAM_NAMES[fam])
    if fam != "ar2" and series.n < k:
        raise FitError(f"{fam} needs at least {k} observations, got {series.n}")
    if fam == "constant":
        return BaseModel(fam, (math.fsum(y) / y.size,))
    if fam == "linear":
        a, b = _linear_lstsq([np.ones_like(t), t], y, 2)
        return BaseModel(fam, (a, b))
    if fam == "polyseasonal":
        w = TWO_PI / cfg.period
        a, b, c, A, B = _linear_lstsq([np.ones_like(t), t, t * t, np.cos(w * t), np.sin(w * t)], y, 5)
        alpha, ph = _amp_phase(A, B)
        return BaseModel(fam, (a, b, c, alpha, ph), period=cfg.period)
    if fam == "sinusoid":
        if cfg.omega is None:
            raise ValueError("the sinusoid family needs FitConfig.omega")
        A, B = _linear_lstsq([np.cos(cfg.omega * t), np.sin(cfg.omega * t)], y, 2)
        alpha, ph = _amp_phase(A, B)
        return BaseModel(fam, (alpha, ph), omega=cfg.omega)
    if fam == "damped_sinusoid":
        return _fit_damped_sinusoid(series, cfg, warm_starts)
    if cfg.robust:
        return fit_ar2_robust(series, cfg)[0]
    return _fit_ar2_plain(series)


def _normalise_damped(alpha, beta, omega, ph):
    if omega < 0:
        omega, ph = -omega, -ph
    if alpha < 0:
        alpha, ph = -alpha, ph + math.pi
    ph %= TWO_PI
    if ph >= TWO_PI:
        ph = 0.0
    return alpha, beta, omega, ph


def _fit_damped_sinusoid(series, cfg, warm_starts):
    t = series.index
    y = series.values

    def resid(th):
        a, b, w, p = th
        return a * np.exp(-b * t) * np.cos(w * t + p) - y

    def jac(th):
        a, b, w, p = th
        e = np.exp(-b * t)
        c = np.cos(w * t + p)
        s = np.sin(w * t + p)
        return np.column_stack([e * c, -t * a * e * c, -t * a * e * s, -a * e * s])

    starts = [tuple(m.params) for m in warm_starts if m.family == "damped_sinusoid"]
    for w in cfg.grid_for(series.n):
        A, B = np.linalg.lstsq(np.column_stack([np.cos(w * t), np.sin(w * t)]), y, rcond=None)[0]
        alpha, ph = _amp_phase(A, B)
        starts.append((max(alpha, 1e-8), 0.0, w, ph))

    best = None
    for x0 in starts:
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                sol = least_squares(resid, np.array(x0, dtype=float), jac=jac, method="lm",
                                    xtol=cfg.tolerance, ftol=cfg.tolerance, gtol=cfg.tolerance,
                                    max_nfev=cfg.max_iterations * 10)
            except ValueError:
                continue
        if not np.all(np.isfinite(sol.x)) or not np.all(np.isfinite(sol.fun)):
            continue
        sse = float(sol.fun @ sol.fun)
        if best is None or sse < best[0]:
            best = (sse, sol)
    if best is None:
        raise FitError("damped sinusoid fit failed from every start")
    sol = best[1]
    a, b, w, p = _normalise_damped(*sol.x)
    if a == 0.0 or w == 0.0:
        raise FitError("damped sinusoid fit collapsed to zero amplitude or frequency")
    converged = sol.status > 0
    if not converged:
        warnings.warn("damped sinusoid fit hit the iteration limit", FitWarning, stacklevel=3)
    return BaseModel("damped_sinusoid", (a, b, w, p), converged=converged)


def _ar2_rows(series):
    if series.n < 3:
        raise InsufficientDataError("an AR(2) fit needs at least 3 values")
    y = series.values
    X = np.column_stack([y[1:-1], y[:-2]])
    return y[2:], X, np.arange(series.start_index + 2, series.end_index + 1)


def _fit_ar2_plain(series):
    target, X, _ = _ar2_rows(series)
    coef, _, rank, _ = np.linalg.lstsq(X, target, rcond=None)
    if rank < 2:
        raise FitError("singular AR(2) design")
    y = series.values
    return BaseModel("ar2", (y[0], y[1], coef[0], coef[1]), origin=series.start_index)


def fit_ar2_robust(series: TimeSeries, config: Optional[FitConfig] = None):
    """Outlier-trimmed AR(2) least squares.

    Rows ``(y_t; y_{t-1}, y_{t-2})`` whose absolute residual exceeds
    ``robust_k`` times the median absolute deviation of the inlier
    residuals are dropped and the fit repeated until the inlier set is
    stable (at most ``robust_rounds`` rounds).

    Returns
    -------
    model : BaseModel
        ``ar2`` model with the observed ``(y1, y2)``.
    removed : frozenset of int
        Absolute indices ``t`` of the rejected rows.
    """
    cfg = config or FitConfig()
    if series.n < 5:
        raise InsufficientDataError("robust AR(2) needs at least 5 values")
    target, X, rows = _ar2_rows(series)
    # residuals at rounding level never count as outliers
    floor = 1e-9 * float(np.max(np.abs(target)))
    keep = np.ones(target.size, dtype=bool)
    coef = None
    for _ in range(cfg.robust_rounds):
        if keep.sum() < 2:
            raise DegenerateFitError("outlier removal left fewer than two rows")
        coef, _, rank, _ = np.linalg.lstsq(X[keep], target[keep], rcond=None)
        if rank < 2:
            if keep.all():
                raise FitError("singular AR(2) design")
            raise DegenerateFitError("the rows left after outlier removal do not determine both coefficients")
        res = target - X @ coef
        inl = res[keep]
        mad = float(np.median(np.abs(inl - np.median(inl))))
        new_keep = np.abs(res) <= max(cfg.robust_k * mad, floor)
        if not new_keep.any():
            raise DegenerateFitError("every row was classified as an outlier")
        if np.array_equal(new_keep, keep):
            break
        keep = new_keep
    else:
        if keep.sum() < 2:
            raise DegenerateFitError("outlier removal left fewer than two rows")
        coef = np.linalg.lstsq(X[keep], target[keep], rcond=None)[0]
    y = series.values
    model = BaseModel("ar2", (y[0], y[1], coef[0], coef[1]), origin=series.start_index)
    return model, frozenset(int(i) for i in rows[~keep])


def sse(model: BaseModel, series: TimeSeries) -> float:
    r = series.values - np.asarray(evaluate(model, series.index))
    return float(r @ r)


def delta_theta(theta0: BaseModel, theta_r: BaseModel) -> np.ndarray:
    """``theta0 - theta_r`` over the free parameters, angle components wrapped to ``(-pi, pi]``."""
    out = []
    for name in theta0.free_names:
        d = theta0[name] - theta_r[name]
        out.append(wrap_angle(d) if name in ANGLE_PARAMS else d)
    return np.array(out)


def with_params(model: BaseModel, **values) -> BaseModel:
    d = model.as_dict()
    d.update(values)
    return replace(model, params=tuple(d[k] for k in model.names))
