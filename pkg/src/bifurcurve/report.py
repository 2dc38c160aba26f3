"""JSON and CSV writers for fibers, verdicts and scan reports."""
from __future__ import annotations

import csv
import io
import json
import math
import re
import sys

import numpy as np

from .topology import FiberTopology

_MARK = "@@float@@"
_MARK_RE = re.compile('"' + _MARK + r'([^"]*)"')

INVARIANT_COLUMNS = ["s", "l", "b0", "b1_betti", "chi", "mu", "stabilized"]


def _fmt_float(x: float) -> str:
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _prepare(obj):
    """Plain JSON types, with floats replaced by marked strings (nan/inf -> None)."""
    if isinstance(obj, dict):
        return {str(k): _prepare(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_prepare(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_prepare(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return _MARK + _fmt_float(x)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return _prepare(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits, nan as null."""
    text = json.dumps(_prepare(obj), sort_keys=True, indent=2)
    return _MARK_RE.sub(lambda m: m.group(1), text) + "\n"


def _open(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def write_text(text: str, path) -> None:
    fh, close = _open(path)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()


def invariants_header(p: int) -> list[str]:
    return [f"b{i + 1}" for i in range(p)] + INVARIANT_COLUMNS


def _csv_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(float(v)) else _fmt_float(float(v))
    return str(v)


def invariant_rows(report) -> tuple[int, list[list]]:
    """(parameter dimension, rows) for a ScanReport, a Verdict or a list of FiberTopology."""
    rows = []
    if isinstance(report, list) and all(isinstance(t, FiberTopology) for t in report):
        p = len(report[0].parameter) if report else 1
        for t in report:
            rows.append(list(np.atleast_1d(t.parameter)) + [t.s, t.l, t.b0, t.b1, t.chi, t.mu, t.stabilized])
        return p, rows
    samples = report.samples if hasattr(report, "samples") else [report]
    p = len(samples[0].value) if samples else 1
    for v in samples:
        inv = v.invariants
        rows.append(list(v.value) + [inv["s"], inv["l"], inv["b0"], inv["b1"], inv["chi"], inv["mu"], inv["stabilized"]])
    return p, rows


def invariants_csv(report) -> str:
    p, rows = invariant_rows(report)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(invariants_header(p))
    for r in rows:
        w.writerow([_csv_value(v) for v in r])
    return buf.getvalue()


def traces_csv(polylines, variables) -> str:
    """Long format: one row per polyline vertex."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve", "point"] + list(variables))
    for i, P in enumerate(polylines):
        for k, x in enumerate(np.asarray(P)):
            w.writerow([i, k] + [_fmt_float(float(v)) for v in x])
    return buf.getvalue()


def write_report(report, fmt: str, path) -> None:
    """Write a ScanReport or Verdict as ``report-json`` or ``invariants-csv``."""
    if fmt == "report-json":
        write_text(dumps(report), path)
    elif fmt == "invariants-csv":
        write_text(invariants_csv(report), path)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
