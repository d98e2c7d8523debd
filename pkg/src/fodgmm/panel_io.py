"""Reading and writing long-format panel CSV files (``id,t,y,x1..xP``)."""

import csv
import math

import numpy as np

from .exceptions import PanelFormatError
from .panel import PanelData

__all__ = ["read_panel_csv", "write_panel_csv"]

_REQUIRED = ("id", "t", "y")


def _number(text, lineno, column):
    try:
        value = float(text)
    except ValueError:
        raise PanelFormatError(f"row {lineno}, column {column!r}: non-numeric value {text!r}") from None
    if not math.isfinite(value):
        raise PanelFormatError(f"row {lineno}, column {column!r}: non-finite value {text!r}")
    return value


def read_panel_csv(path, return_ids=False):
    """Load a balanced panel. Periods of every id must be exactly ``0..T``.

    With ``return_ids`` the ids (in order of first appearance) and the
    regressor column names are returned alongside the panel.

    Raises
    ------
    PanelFormatError
        With the offending row/column for malformed cells, or the offending
        id for missing, duplicated or unbalanced periods.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise PanelFormatError("file is empty")
        header = [h.strip() for h in header]
        if tuple(header[:3]) != _REQUIRED or len(header) < 4:
            raise PanelFormatError(f"header must be id,t,y,x1[,x2,...]; got {','.join(header)}")
        regressors = header[3:]
        records = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise PanelFormatError(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
            ident = row[0].strip()
            t = _number(row[1], lineno, "t")
            if t != int(t) or t < 0:
                raise PanelFormatError(f"row {lineno}, column 't': period must be a non-negative integer, got {row[1]!r}")
            values = [_number(v, lineno, name) for v, name in zip(row[2:], header[2:])]
            periods = records.setdefault(ident, {})
            if int(t) in periods:
                raise PanelFormatError(f"id {ident!r} has period {int(t)} more than once (row {lineno})")
            periods[int(t)] = values
    if not records:
        raise PanelFormatError("file has no data rows")

    T = None
    for ident, periods in records.items():
        last = max(periods)
        missing = sorted(set(range(last + 1)) - set(periods))
        if missing:
            raise PanelFormatError(f"id {ident!r} is missing period {missing[0]}")
        if T is None:
            T = last
        elif last != T:
            raise PanelFormatError(f"unbalanced panel: id {ident!r} has periods 0..{last}, expected 0..{T}")
    ids = list(records)
    data = np.array([[records[i][t] for t in range(T + 1)] for i in ids])
    y = data[:, :, 0]
    x = data[:, :, 1:]
    panel = PanelData(y, x)
    if return_ids:
        return panel, ids, regressors
    return panel


def write_panel_csv(panel, path):
    """Write ``panel`` so that :func:`read_panel_csv` restores it exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "t", "y"] + [f"x{p + 1}" for p in range(panel.P)])
        for i in range(panel.N):
            for t in range(panel.T + 1):
                writer.writerow([i, t, repr(float(panel.y[i, t]))] + [repr(float(v)) for v in panel.x[i, t]])
