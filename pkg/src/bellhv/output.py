"""CSV / JSON emission with fixed precision, and long-format plot data."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from bellhv.analysis import PartitionReport, TransitionReport
from bellhv.distributions import ConditionalDensity
from bellhv.sets import IntervalSet, PointSet, _point_label

SIG_DIGITS = 12
# magnitudes below this print as 0 so rounding noise does not leak into files
ZERO_FLOOR = 1e-13

PLOT_COLUMNS = ("m_a", "m_b", "m_b_prime", "set", "start", "end", "point", "mass")


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if abs(x) < ZERO_FLOOR:
            return "0"
        return format(x, f".{SIG_DIGITS}g")
    if x is None:
        return ""
    return str(x)


def rounded(obj):
    """Recursively round floats to the output precision for JSON."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return 0.0 if abs(obj) < ZERO_FLOOR else float(format(obj, f".{SIG_DIGITS}g"))
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    return obj


def csv_text(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else []
        for row in rows:
            columns += [k for k in row if k not in columns]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(rounded(obj), indent=2, sort_keys=True) + "\n"


def jsonl_text(records: Iterable[dict]) -> str:
    return "".join(json.dumps(rounded(r), sort_keys=True) + "\n" for r in records)


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _set_rows(settings, name: str, subset, resolved) -> list[dict]:
    a, b, b2 = settings
    base = {"m_a": a, "m_b": b, "m_b_prime": b2, "set": name}
    rows = []
    if isinstance(subset, IntervalSet):
        for s, e in subset.intervals:
            piece = IntervalSet(((s, e),), subset.domain)
            rows.append({**base, "start": s, "end": e, "mass": resolved.mass(piece)})
    elif isinstance(subset, PointSet):
        for p in subset:
            rows.append({**base, "point": _point_label(p), "mass": resolved.at(p)})
    return rows


def plotdata_rows(reports: Iterable, density: ConditionalDensity) -> list[dict]:
    """Long-format rows for partition and transition reports.

    A partition contributes ``S_A_plus`` and ``S_A_minus`` with masses under
    ``rho(. | M_A, M_B)``; a transition report contributes both transition
    sets under the same density.
    """
    rows = []
    for rep in reports:
        a, b, _ = rep.settings
        resolved = density.resolve(a, b)
        if isinstance(rep, PartitionReport):
            rows += _set_rows(rep.settings, "S_A_plus", rep.S_A_plus, resolved)
            rows += _set_rows(rep.settings, "S_A_minus", rep.S_A_minus, resolved)
        elif isinstance(rep, TransitionReport):
            rows += _set_rows(rep.settings, "T_plus_minus", rep.T_plus_minus, resolved)
            rows += _set_rows(rep.settings, "T_minus_plus", rep.T_minus_plus, resolved)
        else:
            raise TypeError(f"no plot data for {type(rep).__name__}")
    return rows


def emit_plotdata(reports: Iterable, density: ConditionalDensity, fmt_: str = "csv") -> str:
    rows = plotdata_rows(reports, density)
    if fmt_ == "json":
        return json_text(rows)
    return csv_text(rows, PLOT_COLUMNS)
