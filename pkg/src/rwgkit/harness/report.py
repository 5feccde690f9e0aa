"""CSV emission for scenario results.

Floats are written with ``repr`` (shortest round-trip form) and rows are
ordered by (family, condition, backbone, rec, seed), so equal results give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, fields
from pathlib import Path

import numpy as np
import yaml

from .scenarios import AggregateRow, BoundsReport, RunResult, RunRow, TraceRow

RAW_NAME, AGG_NAME, TRACE_NAME, SUMMARY_NAME, REPORT_NAME = (
    "raw.csv", "aggregate.csv", "traces.csv", "summary.csv", "report.txt")

REPORT_HEADER = ("Synthetic RWG families only (RWG-Molecular, RWG-Citation); external benchmark "
                 "datasets are not reproduced by this harness.")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8", newline="")
    return path


def write_result(res: RunResult, out_dir, config: dict | None = None) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "raw": _write(out / RAW_NAME, _csv([f.name for f in fields(RunRow)],
                                           [astuple(r) for r in res.sorted_rows()])),
        "aggregate": _write(out / AGG_NAME, _csv([f.name for f in fields(AggregateRow)],
                                                 [astuple(a) for a in res.aggregates()])),
        "traces": _write(out / TRACE_NAME, _csv([f.name for f in fields(TraceRow)],
                                                [astuple(t) for t in res.sorted_traces()])),
        "summary": _write(out / SUMMARY_NAME, _csv(["key", "value"], sorted(res.summary.items()))),
        "report": _write(out / REPORT_NAME, render_text(res)),
    }
    if config is not None:
        files["config"] = _write(out / "config.yaml", yaml.safe_dump(config, sort_keys=True))
    return files


def render_text(res: RunResult) -> str:
    lines = [f"# {res.scenario}", f"# {REPORT_HEADER}", ""]
    for a in res.aggregates():
        level = "" if a.level is None else f" level={a.level:g}"
        rec = " +REC" if a.rec else ""
        lines.append(f"{a.family:<10} {a.condition:<16}{level} {a.backbone}{rec}: "
                     f"{100 * a.mean:.2f} ± {100 * a.std:.2f} (n={a.n})")
    lines.append("")
    for k, v in sorted(res.summary.items()):
        lines.append(f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {v}")
    return "\n".join(lines) + "\n"


def write_bounds(report: BoundsReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = list(report.rows[0]) if report.rows else []
    text = report.header + "\n" + _csv(header, [[r[h] for h in header] for r in report.rows])
    return _write(out / "bounds.csv", text)


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def check_aggregates(raw_path, agg_path, tol: float = 1e-9) -> list[str]:
    """Recompute mean and sample std from the raw rows; returns mismatch descriptions."""
    groups: dict[tuple, list[float]] = {}
    for r in read_csv(raw_path):
        key = (r["family"], r["condition"], r["level"], r["backbone"], r["rec"])
        groups.setdefault(key, []).append(float(r["test_acc"]))
    problems = []
    seen = set()
    for a in read_csv(agg_path):
        key = (a["family"], a["condition"], a["level"], a["backbone"], a["rec"])
        seen.add(key)
        vals = groups.get(key)
        if vals is None:
            problems.append(f"aggregate {key} has no raw rows")
            continue
        mean = float(np.mean(vals))
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        if int(a["n"]) != len(vals):
            problems.append(f"{key}: n {a['n']} != {len(vals)}")
        for name, want in (("mean", mean), ("std", std)):
            got = float(a[name])
            if not math.isclose(got, want, rel_tol=0, abs_tol=tol):
                problems.append(f"{key}: {name} {got!r} != recomputed {want!r}")
    problems += [f"raw group {k} missing from aggregates" for k in groups if k not in seen]
    return problems
