"""Delimited time-series tables: the batch interchange format.

Header row pins the column names and display units; missing output samples
are empty cells.  Floats are written with repr (shortest round-trip form),
so write -> read -> write is byte-identical.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import RejectedInputError
from .types import InputVector, OutputVector, TimeSeriesRecord
from .units import from_si, to_si

RECORD_COLUMNS = ("t", "I_A[mA]", "Q_c[sccm]", "Q_s[sccm]", "L_w[um]",
                  "L_o[um]", "P_c[Pa]", "P_s[Pa]", "Q_m[sccm]")
_RECORD_UNITS = (None, "mA", "sccm", "sccm", "um", "um", "Pa", "Pa", "sccm")

TRUTH_COLUMNS = ("t", "d_a[um]", "V_l[mL]", "dr_T[um]", "dr_N[um]", "phi_A")
_TRUTH_UNITS = (None, "um", "mL", "um", "um", None)


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return repr(float(value))


def write_table(path, columns, rows) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_table(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise RejectedInputError("empty table file")
    columns = tuple(lines[0].split(","))
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(columns):
            raise RejectedInputError(
                f"line {lineno}: expected {len(columns)} cells, got {len(cells)}")
        rows.append([float(c) if c != "" else float("nan") for c in cells])
    return columns, rows


def records_to_rows(records):
    rows = []
    for r in records:
        u, y = r.u, r.y
        rows.append([r.t,
                     from_si(u.I_A, "mA"), from_si(u.Q_c, "sccm"),
                     from_si(u.Q_s, "sccm"),
                     from_si(y.L_w, "um"), from_si(y.L_o, "um"),
                     y.P_c, y.P_s, from_si(y.Q_m, "sccm")])
    return rows


def write_records(records, path) -> None:
    write_table(path, RECORD_COLUMNS, records_to_rows(records))


def read_records(path):
    columns, rows = read_table(path)
    if columns != RECORD_COLUMNS:
        missing = [c for c in RECORD_COLUMNS if c not in columns]
        raise RejectedInputError(
            f"bad header: expected {','.join(RECORD_COLUMNS)}"
            + (f" (missing {missing})" if missing else ""))
    records = []
    prev_t = None
    for row in rows:
        t = row[0]
        if math.isnan(t):
            raise RejectedInputError("t column must not be empty")
        if prev_t is not None and t <= prev_t:
            raise RejectedInputError("t column must be strictly increasing")
        prev_t = t
        vals = [row[i + 1] if unit is None else to_si(row[i + 1], unit)
                for i, unit in enumerate(_RECORD_UNITS[1:])]
        records.append(TimeSeriesRecord(
            t=t, u=InputVector(*vals[:3]), y=OutputVector(*vals[3:])))
    return records


def write_truth(trace, path) -> None:
    rows = []
    for k in range(len(trace.t)):
        x = trace.xs[k]
        rows.append([trace.t[k], from_si(x[0], "um"), from_si(x[1], "mL"),
                     from_si(x[2], "um"), from_si(x[3], "um"), x[4]])
    write_table(path, TRUTH_COLUMNS, rows)


def read_truth(path):
    columns, rows = read_table(path)
    if columns != TRUTH_COLUMNS:
        raise RejectedInputError(f"bad header: expected {','.join(TRUTH_COLUMNS)}")
    t = np.array([r[0] for r in rows])
    xs = np.array([[to_si(r[1], "um"), to_si(r[2], "mL"), to_si(r[3], "um"),
                    to_si(r[4], "um"), r[5]] for r in rows]) \
        if rows else np.empty((0, 5))
    return t, xs


def read_input_schedule(path):
    """Input-only table (t + the three input columns) for forecasts."""
    columns, rows = read_table(path)
    expected = RECORD_COLUMNS[:4]
    if tuple(columns) != expected:
        raise RejectedInputError(f"bad header: expected {','.join(expected)}")
    out = []
    for row in rows:
        out.append((row[0], InputVector(to_si(row[1], "mA"),
                                        to_si(row[2], "sccm"),
                                        to_si(row[3], "sccm"))))
    return out
