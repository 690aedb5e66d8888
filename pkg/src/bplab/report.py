"""Tabular reports over simulation results (one row per fixture and level)."""
from __future__ import annotations

import csv
import io
import json
from typing import Iterable

from .pipeline import CLASSES, SimStats

METRICS = ("ipc", "jump_mpki", "branch_mpki", "branch_accuracy", "perfect_ipc")
RAW = ("retired", "cycles", "penalty_cycles") + tuple(
    f"{c}_{field}" for c in CLASSES for field in ("count", "mispredicts")
)
COLUMNS = ("fixture", "level") + METRICS + RAW


def report_rows(results: Iterable[tuple[str, str, SimStats]]) -> list[dict]:
    rows = []
    for fixture, level, s in results:
        row = {"fixture": fixture, "level": level}
        for m in METRICS:
            row[m] = round(getattr(s, m), 6)
        row.update(retired=s.retired, cycles=s.cycles, penalty_cycles=s.penalty_cycles)
        for c in CLASSES:
            row[f"{c}_count"] = s.classes[c].count
            row[f"{c}_mispredicts"] = s.classes[c].mispredicts
        rows.append(row)
    return rows


def emit_report(results: Iterable[tuple[str, str, SimStats]], fmt: str = "csv") -> str:
    rows = report_rows(results)
    if fmt == "json":
        return json.dumps(rows, indent=2)
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
