"""Integrated gradients of the surrogate correction along the straight parameter path.

For a parameter shift ``d = theta0 - theta_r`` the path is
``gamma(h) = theta_r + h d`` and

    IG_k(t) = d_k * integral_0^1 df/dtheta_k (t, gamma(h)) dh,

so that ``sum_k IG_k(t) = f_theta0(t) - f_theta_r(t)``. Angle parameters
use the wrapped difference, so the path starts at an angle equivalent to
the refitted one.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .engine import BapcResult, SbapcResult
from .models import CLOSED_FORM_MAX_T, TWO_PI, BaseModel, delta_theta, partials

COMPLETENESS_RTOL = 1e-6
DEFAULT_NODES = 64
SINGULAR_RADIUS = 1e-9


class PrecisionError(ValueError):
    """The closed form is not trusted this far out; use quadrature."""


@dataclass(frozen=True, eq=False)
class Attribution:
    """One integrated-gradient vector and its completeness check."""

    names: tuple
    values: np.ndarray
    t: float
    delta_f: float
    method: str
    anchor: Optional[int] = None
    error_estimate: Optional[float] = None

    @property
    def completeness_residual(self) -> float:
        return abs(math.fsum(self.values) - self.delta_f)

    @property
    def complete(self) -> bool:
        return self.completeness_residual <= COMPLETENESS_RTOL * (1.0 + abs(self.delta_f))

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in zip(self.names, self.values)}


def _leggauss01(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (x + 1.0), 0.5 * w


def ig_linear(delta, basis, names=None, t=float("nan"), delta_f=None) -> Attribution:
    """``IG_k = delta_k g_k(t)`` for models linear in their parameters."""
    d = np.asarray(delta, dtype=float)
    g = np.asarray(basis, dtype=float)
    if d.shape != g.shape:
        raise ValueError("parameter shift and basis must have the same length")
    if not np.all(np.isfinite(g)):
        raise ValueError("basis values must be finite")
    values = d * g
    names = tuple(names) if names is not None else tuple(f"theta{k}" for k in range(d.size))
    if delta_f is None:
        delta_f = float(d @ g)
    return Attribution(names, values, float(t), float(delta_f), "closed-form")


def _phasor_integrals(D: complex):
    """``E1 = (e^D - 1)/D`` and ``E2 = (e^D - 1 - D)/D^2`` without cancellation."""
    if abs(D) < 0.5:
        e1 = e2 = 0j
        term = 1.0 + 0j  # D^k / k!
        for k in range(30):
            e1 += term / (k + 1)
            e2 += term / ((k + 1) * (k + 2))
            term *= D / (k + 1)
        return e1, e2
    x, y = D.real, D.imag
    em1 = complex(math.expm1(x) * math.cos(y) - 2.0 * math.sin(0.5 * y) ** 2, math.exp(x) * math.sin(y))
    return em1 / D, (em1 - D) / (D * D)


def _oscillator_ig(alpha0, d_alpha, z_r, D, shifts, mus):
    """IG of ``Re[alpha e^z]`` when ``alpha`` and ``z`` move linearly along the path.

    ``shifts`` are the parameter differences of the phase-type parameters and
    ``mus`` their coefficients in ``dz/dtheta``.
    """
    e1, e2 = _phasor_integrals(D)
    base = cmath.exp(z_r)
    out = [d_alpha * (base * e1).real]
    weighted = base * (alpha0 * e1 - d_alpha * e2)
    out.extend(d * (mu * weighted).real for d, mu in zip(shifts, mus))
    return out


def ig_damped_sinusoid(theta0, theta_r, t) -> Attribution:
    """Closed-form IG for ``alpha exp(-beta t) cos(omega t + phi)``; inputs are ``(alpha, beta, omega, phi)``."""
    m0 = BaseModel("damped_sinusoid", theta0) if not isinstance(theta0, BaseModel) else theta0
    mr = BaseModel("damped_sinusoid", theta_r) if not isinstance(theta_r, BaseModel) else theta_r
    return _attribute(m0, mr, float(t))


def ig_ar2(theta0, theta_r, y1, y2, t) -> Attribution:
    """Closed-form IG for the AR(2) coefficients at local index ``t`` (``y1`` sits at ``t = 1``)."""
    t = int(t)
    if t < 1:
        raise ValueError("t must be >= 1")
    m0 = BaseModel("ar2", (y1, y2, *theta0), origin=1)
    mr = BaseModel("ar2", (y1, y2, *theta_r), origin=1)
    return _attribute(m0, mr, t)


def ig_quadrature(theta0: BaseModel, theta_r: BaseModel, t, nodes: int = DEFAULT_NODES) -> Attribution:
    """Gauss-Legendre evaluation of the path integral; the error estimate compares ``nodes`` and ``2 nodes``."""
    if nodes < 1:
        raise ValueError("nodes must be positive")
    d = delta_theta(theta0, theta_r)
    start = theta0.free_vector() - d

    def integral(k):
        h, w = _leggauss01(k)
        acc = np.zeros(d.size)
        for hi, wi in zip(h, w):
            g = partials(theta0.with_free(start + hi * d), t)
            if not np.all(np.isfinite(g)):
                raise ArithmeticError(f"non-finite gradient on the path at h={hi}")
            acc += wi * g
        return d * acc

    coarse = integral(nodes)
    fine = integral(2 * nodes)
    df = float(theta0(t) - theta_r(t))
    return Attribution(theta0.free_names, coarse, float(t), df, "quadrature",
                       error_estimate=float(np.max(np.abs(fine - coarse))))


def _check_pair(m0: BaseModel, mr: BaseModel):
    if m0.family != mr.family:
        raise ValueError("both parameter sets must belong to the same family")
    if (m0.period, m0.omega, m0.origin) != (mr.period, mr.omega, mr.origin):
        raise ValueError("fixed settings (period, omega, origin) differ between the two models")
    if m0.family == "ar2" and m0.params[:2] != mr.params[:2]:
        raise ValueError("AR(2) starting values must agree")


def _attribute(m0: BaseModel, mr: BaseModel, t) -> Attribution:
    _check_pair(m0, mr)
    fam = m0.family
    names = m0.free_names
    d = delta_theta(m0, mr)
    df = float(m0(t) - mr(t))
    if fam in ("constant", "linear"):
        return ig_linear(d, partials(m0, t), names, t, df)
    if fam == "ar2":
        y1, y2 = m0.params[:2]
        k = int(t) - m0.origin + 1
        if k > CLOSED_FORM_MAX_T:
            raise PrecisionError(
                f"closed-form AR(2) attribution is limited to t <= {CLOSED_FORM_MAX_T}; use ig_quadrature"
            )
        r1, r2 = mr["phi1"], mr["phi2"]
        vals = kernels.ar2_ig_sums(k, r1, r2, d[0], d[1], y1, y2)
        return Attribution(names, np.array(vals), float(t), df, "closed-form")

    if fam == "damped_sinusoid":
        a0, b0, w0, p0 = m0.params
        da, db, dw, dp = d
        alpha_r, beta_r, omega_r, phi_r = a0 - da, b0 - db, w0 - dw, p0 - dp
        D = complex(-db * t, dw * t + dp)
        shifts, mus = (db, dw, dp), (-t, 1j * t, 1j)
        lead = ()
    else:
        if fam == "sinusoid":
            a0, p0 = m0.params
            da, dp = d
            w = m0.omega
            lead = ()
        else:
            a0, p0 = m0["alpha"], m0["phi"]
            da, dp = d[3], d[4]
            w = TWO_PI / m0.period
            lead = tuple(d[:3] * np.array([1.0, t, t * t]))
        alpha_r, beta_r, omega_r, phi_r = a0 - da, 0.0, w, p0 - dp
        D = complex(0.0, dp)
        shifts, mus = (dp,), (1j,)
    if abs(D) < SINGULAR_RADIUS:
        return ig_quadrature(m0, mr, t)
    z_r = complex(-beta_r * t, omega_r * t + phi_r)
    vals = _oscillator_ig(a0, da, z_r, D, shifts, mus)
    return Attribution(names, np.array(list(lead) + vals), float(t), df, "closed-form")


def integrated_gradients(theta0: BaseModel, theta_r: BaseModel, t, method: str = "auto",
                         nodes: int = DEFAULT_NODES) -> Attribution:
    """IG of ``f_theta0 - f_theta_r`` at ``t``.

    ``method`` is ``"closed-form"``, ``"quadrature"`` or ``"auto"`` (closed
    form where it is trusted, quadrature otherwise).
    """
    _check_pair(theta0, theta_r)
    if method == "quadrature":
        return ig_quadrature(theta0, theta_r, t, nodes)
    if method not in ("auto", "closed-form"):
        raise ValueError(f"unknown method {method!r}")
    try:
        return _attribute(theta0, theta_r, t)
    except PrecisionError:
        if method == "closed-form":
            raise
        return ig_quadrature(theta0, theta_r, t, nodes)


def attribute_bapc(result: BapcResult, t, method: str = "auto") -> Attribution:
    return integrated_gradients(result.theta0, result.theta_r, t, method)


@dataclass(frozen=True, eq=False)
class Heatmaps:
    """Per-parameter ``(anchor, position)`` matrices aligned with ``SbapcResult.matrix``."""

    names: tuple
    anchors: tuple
    n: int
    ig: dict
    surrogate: np.ndarray
    residual: np.ndarray
    errors: dict

    def cells(self, name: str):
        m = self.residual if name == "residual" else self.ig[name]
        for i, s in enumerate(self.anchors):
            for j in range(self.n):
                yield s, s - self.n + 1 + j, float(m[i, j])

    @property
    def max_scaled_residual(self) -> float:
        """Largest ``|sum_k IG_k - delta_f| / (1 + |delta_f|)`` over the computed cells."""
        scaled = self.residual / (1.0 + np.abs(self.surrogate))
        return float(np.nanmax(scaled)) if np.any(np.isfinite(scaled)) else 0.0


def ig_heatmaps(result: SbapcResult, method: str = "auto") -> Heatmaps:
    """Integrated gradients at every ``(s, t)`` cell of a sliding-window run."""
    first = next((r for r in result.results if r is not None), None)
    if first is None:
        raise ValueError("every anchor failed; nothing to attribute")
    names = first.parameter_names
    shape = result.matrix.shape
    ig = {k: np.full(shape, np.nan) for k in names}
    residual = np.full(shape, np.nan)
    errors = {}
    for i, (s, res) in enumerate(zip(result.anchors, result.results)):
        if res is None:
            continue
        for j, t in enumerate(result.row_times(s)):
            try:
                att = integrated_gradients(res.theta0, res.theta_r, int(t), method)
            except (ValueError, ArithmeticError) as exc:
                errors[(s, int(t))] = f"{type(exc).__name__}: {exc}"
                continue
            for k, v in zip(names, att.values):
                ig[k][i, j] = v
            residual[i, j] = abs(math.fsum(att.values) - float(result.matrix[i, j]))
    for m in (*ig.values(), residual):
        m.setflags(write=False)
    return Heatmaps(names, result.anchors, result.n, ig, result.matrix, residual, errors)
