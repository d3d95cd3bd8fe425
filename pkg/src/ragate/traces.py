"""Trace, summary and manifest files for one run."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from .runner import RunSummary, StepRecord

__all__ = ["TRACE_COLUMNS", "emit_trace", "format_value", "jsonable", "read_trace", "trace_rows", "write_json"]

# Frozen column order; a golden-file test pins it.
TRACE_COLUMNS = (
    "step",
    "edge_id",
    "cloud_delay_s",
    "best_edge_delay_s",
    "best_overlap_ratio",
    "best_edge_id",
    "multi_hop",
    "query_len_tokens",
    "entity_count",
    "arm",
    "phase",
    "accuracy",
    "delay_s",
    "u_r",
    "u_d",
    "u_t",
    "safe_set_size",
    "acc_violation",
    "delay_violation",
)


def format_value(v):
    """Serialize floats at 9 significant digits; bools as 0/1."""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            return None
        return float(f"{v:.9g}")
    return v


def trace_rows(records: Sequence[StepRecord]) -> list[dict]:
    return [{k: format_value(getattr(r, k)) for k in TRACE_COLUMNS} for r in records]


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in rows:
        w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in row.values()])
    return buf.getvalue()


def jsonable(obj):
    """Nested copy with floats at 9 significant digits and non-finite values as null."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return format_value(obj)


def write_json(path: Path, obj) -> None:
    _write(path, json.dumps(jsonable(obj), indent=2, sort_keys=False) + "\n")


def _write(path: Path, text: str) -> None:
    try:
        with open(path, "w", newline="") as f:
            f.write(text)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e


def emit_trace(
    records: Sequence[StepRecord],
    summary: RunSummary,
    out_dir: str | Path,
    format: str = "csv",
    manifest: dict | None = None,
) -> dict[str, Path]:
    """Write ``trace.<format>``, ``summary.json`` and ``manifest.json`` into `out_dir`.

    Returns the written paths keyed by ``trace``, ``summary``, ``manifest``.
    """
    if format not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {format!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out}: {e.strerror or e}") from e
    rows = trace_rows(records)
    paths = {"trace": out / f"trace.{format}", "summary": out / "summary.json", "manifest": out / "manifest.json"}
    if format == "csv":
        _write(paths["trace"], _csv_text(rows))
    else:
        write_json(paths["trace"], {"columns": list(TRACE_COLUMNS), "rows": rows})
    write_json(paths["summary"], asdict(summary))
    write_json(paths["manifest"], manifest or {})
    return paths


def read_trace(path: str | Path) -> list[dict]:
    """Rows of a trace written by :func:`emit_trace`, typed like the JSON form."""
    p = Path(path)
    if p.suffix == ".json":
        return json.loads(p.read_text())["rows"]
    ints = {"step", "edge_id", "best_edge_id", "multi_hop", "query_len_tokens", "entity_count",
            "safe_set_size", "acc_violation", "delay_violation"}
    strs = {"arm", "phase"}
    rows = []
    with open(p, newline="") as f:
        for raw in csv.DictReader(f):
            rows.append({
                k: (v if k in strs else int(v) if k in ints else float(v))
                for k, v in raw.items()
            })
    return rows
