"""Dataset loaders and atomic, byte-stable artifact writers."""
from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from importlib import resources

from .timeseries import CSVFormatError, TimeSeries

AIR_PASSENGERS_ROWS = 144


def format_float(x) -> str:
    return "%.17g" % float(x)


def _cell(v) -> str:
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def _atomic_write(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    """Write rows with floats at 17 significant digits, via temp file + rename."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    _atomic_write(path, buf.getvalue())


def write_json(path, obj):
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def write_series(path, series: TimeSeries):
    write_csv(path, ["t", "value"], zip(range(series.start_index, series.end_index + 1),
                                         (float(v) for v in series.values)))


def _next_month(label):
    year, month = label
    return (year + 1, 1) if month == 12 else (year, month + 1)


def _parse_month(text, where):
    try:
        y, m = text.split("-")
        out = (int(y), int(m))
    except ValueError:
        raise CSVFormatError(f"{where}: bad month label {text!r}") from None
    if not 1 <= out[1] <= 12 or len(y) != 4 or len(m) != 2:
        raise CSVFormatError(f"{where}: bad month label {text!r}")
    return out


def load_air_passengers(path=None) -> TimeSeries:
    """Monthly airline passenger totals, 1949-01 to 1960-12 (bundled copy by default)."""
    if path is None:
        text = resources.files("tsbapc").joinpath("data/airpassengers.csv").read_text()
        where = "airpassengers.csv"
    else:
        with open(path, newline="") as fh:
            text = fh.read()
        where = os.fspath(path)
    rows = [r for r in csv.reader(_io.StringIO(text)) if r]
    if not rows or [c.strip() for c in rows[0]] != ["month", "passengers"]:
        raise CSVFormatError(f"{where}: header must be 'month,passengers'")
    body = rows[1:]
    if len(body) != AIR_PASSENGERS_ROWS:
        raise CSVFormatError(f"{where}: expected {AIR_PASSENGERS_ROWS} monthly rows, got {len(body)}")
    labels, values = [], []
    expected = (1949, 1)
    for lineno, row in enumerate(body, start=2):
        if len(row) != 2:
            raise CSVFormatError(f"{where}:{lineno}: expected 2 columns")
        month = _parse_month(row[0].strip(), f"{where}:{lineno}")
        if month != expected:
            raise CSVFormatError(
                f"{where}:{lineno}: expected month {expected[0]}-{expected[1]:02d}, got {row[0]!r}"
            )
        expected = _next_month(month)
        try:
            values.append(float(row[1]))
        except ValueError:
            raise CSVFormatError(f"{where}:{lineno}: non-numeric count {row[1]!r}") from None
        labels.append(f"{month[0]}-{month[1]:02d}")
    return TimeSeries(values, 1, labels)
