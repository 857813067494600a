"""Series, window and lag-matrix types with 1-based absolute indexing."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class InsufficientDataError(ValueError):
    """Not enough observations for the requested operation."""


class CSVFormatError(ValueError):
    """A series file does not follow the expected layout."""


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Finite real-valued series ``y_t`` for ``t = start_index .. start_index + n - 1``.

    Parameters
    ----------
    values : sequence of float
        Observations; must be finite and non-empty.
    start_index : int
        Absolute index of the first observation (1 by default).
    labels : sequence of str, optional
        One calendar label per observation.
    """

    values: np.ndarray
    start_index: int = 1
    labels: Optional[tuple] = None

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("a series needs at least one value")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series values must be finite (missing values are not imputed)")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "start_index", int(self.start_index))
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != arr.size:
                raise ValueError(f"expected {arr.size} labels, got {len(labels)}")
            object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.start_index == other.start_index
            and self.labels == other.labels
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def end_index(self) -> int:
        return self.start_index + self.values.size - 1

    @property
    def index(self) -> np.ndarray:
        """Absolute indices as a float array (ready for model evaluation)."""
        return np.arange(self.start_index, self.end_index + 1, dtype=float)

    def __getitem__(self, t: int) -> float:
        """Value at absolute index ``t``."""
        if not self.start_index <= t <= self.end_index:
            raise IndexError(f"index {t} outside [{self.start_index}, {self.end_index}]")
        return float(self.values[t - self.start_index])

    def label(self, t: int) -> Optional[str]:
        if self.labels is None:
            return None
        return self.labels[t - self.start_index]

    def with_values(self, values) -> "TimeSeries":
        """Same indexing and labels, new values."""
        return TimeSeries(values, self.start_index, self.labels)


@dataclass(frozen=True)
class WindowConfig:
    """Training window size ``n`` and correction window size ``r`` (``0 <= r <= n``)."""

    train_size: int
    correction_size: int = 0

    def __post_init__(self):
        if self.train_size < 1:
            raise ValueError("train_size must be positive")
        if not 0 <= self.correction_size <= self.train_size:
            raise ValueError(
                f"correction_size must lie in [0, {self.train_size}], got {self.correction_size}"
            )

    @property
    def n(self) -> int:
        return self.train_size

    @property
    def r(self) -> int:
        return self.correction_size


@dataclass(frozen=True, eq=False)
class LagMatrix:
    """Rows ``(x_t; x_{t-1}, ..., x_{t-p})`` for ``t = start + p .. end``."""

    order: int
    targets: np.ndarray
    lags: np.ndarray
    row_index: np.ndarray = field(default=None)

    def __len__(self):
        return self.targets.size

    def row(self, t: int):
        i = int(t - self.row_index[0])
        if not 0 <= i < len(self):
            raise IndexError(f"no lag row for index {t}")
        return float(self.targets[i]), self.lags[i].copy()


def slice_series(series: TimeSeries, first: int, last: int) -> TimeSeries:
    """Contiguous sub-series ``y_first .. y_last`` keeping absolute indices."""
    if not series.start_index <= first <= last <= series.end_index:
        raise IndexError(
            f"slice [{first}, {last}] outside [{series.start_index}, {series.end_index}]"
        )
    lo = first - series.start_index
    hi = last - series.start_index + 1
    labels = None if series.labels is None else series.labels[lo:hi]
    return TimeSeries(series.values[lo:hi], first, labels)


def build_lag_matrix(series: TimeSeries, p: int) -> LagMatrix:
    """Autoregressive design with lags in most-recent-first order."""
    if p < 1:
        raise ValueError("lag order must be >= 1")
    n = series.n
    if p >= n:
        raise InsufficientDataError(f"need more than {p} values for {p} lags, got {n}")
    y = series.values
    lags = np.column_stack([y[p - j - 1 : n - j - 1] for j in range(p)])
    targets = y[p:].copy()
    rows = np.arange(series.start_index + p, series.end_index + 1)
    lags.setflags(write=False)
    targets.setflags(write=False)
    rows.setflags(write=False)
    return LagMatrix(p, targets, lags, rows)


def read_series_csv(path) -> TimeSeries:
    """Read a one- or two-column CSV.

    Accepted headers are ``value``, ``t,value`` and ``label,value``. With a
    ``t`` column the indices must be consecutive integers.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise CSVFormatError(f"{path}: empty file")
    header = [c.strip().lower() for c in rows[0]]
    body = rows[1:]
    if header not in (["value"], ["t", "value"], ["label", "value"]):
        raise CSVFormatError(f"{path}: unsupported header {rows[0]!r}")
    values, firsts = [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise CSVFormatError(f"{path}:{lineno}: expected {len(header)} columns")
        try:
            v = float(row[-1])
        except ValueError:
            raise CSVFormatError(f"{path}:{lineno}: non-numeric value {row[-1]!r}") from None
        if not math.isfinite(v):
            raise CSVFormatError(f"{path}:{lineno}: non-finite value")
        values.append(v)
        firsts.append(row[0].strip())
    if not values:
        raise CSVFormatError(f"{path}: no data rows")
    if header[0] == "t":
        try:
            idx = [int(s) for s in firsts]
        except ValueError:
            raise CSVFormatError(f"{path}: non-integer index column") from None
        if any(b - a != 1 for a, b in zip(idx, idx[1:])):
            raise CSVFormatError(f"{path}: indices must be consecutive")
        return TimeSeries(values, idx[0])
    if header[0] == "label":
        return TimeSeries(values, 1, firsts)
    return TimeSeries(values)
