"""CSV reports with a JSON metadata sidecar."""
from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np

from .._version import __version__
from ..errors import ParseError, TorLabError
from .experiment import REPORT_COLUMNS, EvalReport, ReportRow


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def emit_report(report: EvalReport, path) -> Path:
    """Write run rows then aggregate rows to ``path`` and the plan/seed/version
    record to ``<path>.meta.json``. Returns the metadata path."""
    path = Path(path)
    rows = list(report.rows) + report.aggregate()
    meta = {
        "tool": "tor-lab", "version": __version__,
        "python": platform.python_version(), "numpy": np.__version__,
        "columns": list(REPORT_COLUMNS),
        "seeds": sorted({r.seed for r in report.rows if r.seed is not None}),
        "plans": report.plans,
    }
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(REPORT_COLUMNS)
            for r in rows:
                w.writerow([_fmt(v) for v in r.values()])
        with open(meta_path(path), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=1)
    except OSError as exc:
        raise TorLabError(f"cannot write report {path}: {exc.strerror or exc}") from None
    return meta_path(path)


def read_report(path) -> list[ReportRow]:
    """Parse a report written by :func:`emit_report` (run and aggregate rows)."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != REPORT_COLUMNS:
                raise ParseError(f"{path}: unexpected report header {header}")
            out = []
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != len(REPORT_COLUMNS):
                    raise ParseError(f"{path}: expected {len(REPORT_COLUMNS)} fields",
                                     line=lineno)
                d = dict(zip(REPORT_COLUMNS, rec))
                try:
                    out.append(ReportRow(
                        dataset=d["dataset"], seed=int(d["seed"]) if d["seed"] else None,
                        n=int(d["n"]), method=d["method"], c1=float(d["c1"]),
                        zero_one=float(d["zero_one"]), mae=float(d["mae"]),
                        wall_time=float(d["wall_time"]), iterations=int(d["iterations"]),
                        flags=d["flags"], error=d["error"], kind=d["kind"]))
                except ValueError as exc:
                    raise ParseError(f"{path}: {exc}", line=lineno) from None
    except OSError as exc:
        raise TorLabError(f"cannot read report {path}: {exc.strerror or exc}") from None
    return out


def check_rows(rows) -> list[str]:
    """Range checks on every scored row; returns problem descriptions."""
    problems = []
    for r in rows:
        if r.error or math.isnan(r.zero_one):
            continue
        if r.kind != "std" and not 0.0 <= r.zero_one <= 1.0:
            problems.append(f"{r.values()}: zero-one error out of range")
        if r.kind != "std" and r.mae < r.zero_one:
            problems.append(f"{r.values()}: mean absolute error below zero-one error")
    return problems
