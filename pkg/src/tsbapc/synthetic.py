"""Synthetic series driven by forced oscillator / kinematic ODEs with one change point.

Each series samples a closed-form solution ``u`` at ``tau = t - 1``. By
default the change time is moved so that the first affected sample is
``change_index``; ``raw_sampling=True`` uses ``t_star`` as given.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .models import sin_to_ar2
from .timeseries import TimeSeries

KINDS = ("step", "ramp", "sinacp", "sinfcp")

_DEFAULTS = {
    "step": dict(u0=-1.0, v0=0.0, F=2.0, t_star=48.5, omega=0.0, nu=0.0, n=96),
    "ramp": dict(u0=23.5, v0=-1.0, F=2.0, t_star=48.5, omega=0.0, nu=0.0, n=96),
    "sinacp": dict(u0=1.0, v0=0.0, F=-2 * math.pi / 24, t_star=55.0, omega=2 * math.pi / 24, nu=0.0, n=96),
    "sinfcp": dict(u0=1.0, v0=0.0, F=0.0, t_star=81.0, omega=2 * math.pi / 40, nu=4 * math.pi / 40, n=160),
}


def _heaviside(x):
    return np.where(x >= 0, 1.0, 0.0)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of one synthetic series.

    ``ramp_form`` selects how the ramp's forcing acts: ``"kink"`` adds
    ``F (t - t*)`` after the change (slope change, the solution of
    ``u'' = F delta``), ``"jump"`` adds a constant ``F``.
    """

    kind: str
    u0: float
    v0: float
    F: float
    t_star: float
    omega: float
    nu: float
    n: int
    change_index: int
    raw_sampling: bool = False
    ramp_form: str = "kink"

    def __post_init__(self):
        kind = self.kind.strip().lower()
        if kind not in KINDS:
            raise ValueError(f"unknown synthetic kind {self.kind!r}; choose from {list(KINDS)}")
        object.__setattr__(self, "kind", kind)
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if kind in ("sinacp", "sinfcp") and not self.omega > 0:
            raise ValueError("omega must be positive")
        if kind == "sinfcp" and not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.ramp_form not in ("kink", "jump"):
            raise ValueError("ramp_form must be 'kink' or 'jump'")
        if not self.raw_sampling and not 2 <= self.change_index <= self.n:
            raise ValueError(f"change_index must lie in [2, {self.n}]")

    @classmethod
    def default(cls, kind: str, n: Optional[int] = None, change_index: Optional[int] = None, **overrides):
        """Reference settings; ``change_index`` keeps its relative position when ``n`` changes."""
        kind = kind.strip().lower()
        if kind not in KINDS:
            raise ValueError(f"unknown synthetic kind {kind!r}; choose from {list(KINDS)}")
        d = dict(_DEFAULTS[kind])
        if n is not None:
            d["n"] = int(n)
        if change_index is None:
            if kind == "sinacp":
                change_index = int(round(55 * d["n"] / 96))
            else:
                change_index = d["n"] // 2 + 1
        d.update(overrides)
        return cls(kind=kind, change_index=int(change_index), **d)

    @property
    def effective_t_star(self) -> float:
        """Change time on the ``tau`` axis after aligning it with ``change_index``."""
        if self.raw_sampling:
            return self.t_star
        raw_first = math.ceil(self.t_star) + 1  # smallest t with t - 1 >= t_star
        return self.t_star - (raw_first - self.change_index)

    def solution(self, tau):
        """Closed-form ``u(tau)``."""
        tau = np.asarray(tau, dtype=float)
        ts = self.effective_t_star
        H = _heaviside(tau - ts)
        if self.kind == "step":
            return self.u0 + self.F * H
        if self.kind == "ramp":
            jump = (tau - ts) if self.ramp_form == "kink" else 1.0
            return self.u0 + self.v0 * tau + self.F * jump * H
        w = self.omega
        if self.kind == "sinacp":
            return self.u0 * np.cos(w * tau) + (self.F / w) * np.sin(w * (tau - ts)) * H
        post = self.u0 * np.cos(self.nu * tau + (w - self.nu) * ts)
        return np.where(H > 0, post, self.u0 * np.cos(w * tau))

    def to_json_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["effective_t_star"] = self.effective_t_star
        return d

    def with_n(self, n: int) -> "SyntheticSpec":
        return replace(self, n=int(n))


def generate(spec: SyntheticSpec) -> TimeSeries:
    """Sample ``y_t = u(t - 1)`` for ``t = 1..n``."""
    tau = np.arange(spec.n, dtype=float)
    return TimeSeries(spec.solution(tau))


def first_affected_index(spec: SyntheticSpec) -> int:
    return math.ceil(spec.effective_t_star) + 1


def verify_dynamics(series: TimeSeries, spec: SyntheticSpec) -> float:
    """Largest violation of the undamped AR(2) recursion on either side of the change.

    Only rows whose three samples lie on the same side are checked; the
    result is scaled by ``max |y|``.
    """
    if spec.kind not in ("sinacp", "sinfcp"):
        raise ValueError("dynamics can only be verified for the oscillating kinds")
    y = series.values
    c = first_affected_index(spec) - series.start_index
    w_post = spec.nu if spec.kind == "sinfcp" else spec.omega
    worst = 0.0
    for lo, hi, w in ((0, c, spec.omega), (c, y.size, w_post)):
        seg = y[lo:hi]
        if seg.size < 3:
            continue
        _, _, p1, p2 = sin_to_ar2(1.0, 0.0, w, 0.0)
        res = seg[2:] - p1 * seg[1:-1] - p2 * seg[:-2]
        worst = max(worst, float(np.max(np.abs(res))))
    scale = float(np.max(np.abs(y)))
    return worst / scale if scale > 0 else worst
