"""Aggregate per-example records into a report; render and re-parse tables."""

from __future__ import annotations

import csv
import io
import json
import math
import os

import numpy as np

from faithkit import __version__
from faithkit.errors import EmptyInputError, ParseError
from faithkit.metrics import DIRECTIONS
from faithkit.metrics.stats import t_test

METRIC_LABELS = {"comp": "comprehensiveness", "suff": "sufficiency", "sens": "sensitivity", "stab": "stability"}


def examples_path(report_path: str) -> str:
    root, _ = os.path.splitext(report_path)
    return root + ".examples.jsonl"


def _finite(value):
    """JSON-safe float: NaN and inf become ``None``."""
    return float(value) if value is not None and math.isfinite(value) else None


def aggregate(records, methods, metrics) -> dict:
    cells = {}
    for method in methods:
        for metric in metrics:
            rows = [r for r in records if r.method == method and r.metric == metric]
            values = np.array([r.value for r in rows if not r.failed], dtype=np.float64)
            cells.setdefault(method, {})[metric] = {
                "mean": _finite(values.mean()) if values.size else None,
                "std": _finite(values.std(ddof=1)) if values.size > 1 else None,
                "count": int(values.size),
                "failures": int(sum(r.failed for r in rows)),
                "attack_failures": int(sum(r.attack_failures for r in rows)),
            }
    return cells


def significance(records, methods, metrics) -> dict:
    """Pairwise two-sample t tests per metric; entries hold (t, p, df) or ``None``."""
    table = {}
    for metric in metrics:
        samples = {
            m: [r.value for r in records if r.method == m and r.metric == metric and not r.failed]
            for m in methods
        }
        table[metric] = {}
        for a in methods:
            row = {}
            for b in methods:
                if a == b or len(samples[a]) < 2 or len(samples[b]) < 2:
                    row[b] = None
                    continue
                result = t_test(samples[a], samples[b])
                row[b] = {"t": _finite(result.t), "p": _finite(result.p), "df": result.df}
            table[metric][a] = row
    return table


def build_report(cfg, indices, records, pgd_eps=None) -> dict:
    methods, metrics = list(cfg.methods), list(cfg.metrics)
    return {
        "version": __version__,
        "seed": cfg.seed,
        "examples": [int(i) for i in indices],
        "methods": methods,
        "metrics": metrics,
        "directions": {m: DIRECTIONS[m] for m in metrics},
        "cells": aggregate(records, methods, metrics),
        "significance": significance(records, methods, metrics),
        "pgd_eps": pgd_eps or {},
        "config": cfg.echo(),
    }


def write_report(report: dict, records, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    ordered = sorted(records, key=lambda r: (r.example, report["methods"].index(r.method),
                                             report["metrics"].index(r.metric)))
    with open(examples_path(path), "w", encoding="utf-8") as fh:
        for record in ordered:
            row = record.as_dict()
            row["value"] = _finite(row["value"])
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_report(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        raise EmptyInputError(f"empty report: {path}")
    try:
        report = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not a report ({exc.msg})", line=exc.lineno) from None
    if not isinstance(report, dict) or not report.get("methods") or not report.get("metrics"):
        raise EmptyInputError(f"report has no methods or metrics: {path}")
    return report


def load_examples(path: str) -> list[dict]:
    with open(examples_path(path), encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def best_methods(report: dict) -> dict[str, str | None]:
    """Best method per metric by the metric's direction; ties go to the earlier method."""
    best = {}
    for metric in report["metrics"]:
        sign = DIRECTIONS[metric]
        scored = [(m, report["cells"][m][metric]["mean"]) for m in report["methods"]]
        scored = [(m, v) for m, v in scored if v is not None]
        best[metric] = max(scored, key=lambda mv: sign * mv[1])[0] if scored else None
    return best


def significance_mark(report: dict, metric: str, method: str, best: str | None) -> str:
    """Significance of the best method against ``method``: two marks at 95%, one at 90%."""
    if best is None or method == best:
        return ""
    entry = report["significance"][metric][best][method]
    if entry is None or entry["p"] is None:
        return ""
    if entry["p"] < 0.05:
        return "✓✓"
    if entry["p"] < 0.10:
        return "✓"
    return ""


def table_rows(report: dict) -> tuple[list[str], list[list[str]]]:
    best = best_methods(report)
    header = ["method"]
    for metric in report["metrics"]:
        header += [metric, f"{metric}_std", f"{metric}_n", f"{metric}_fail", f"{metric}_mark"]
    rows = []
    for method in report["methods"]:
        row = [method]
        for metric in report["metrics"]:
            cell = report["cells"][method][metric]
            mark = "*" if best[metric] == method else significance_mark(report, metric, method, best[metric])
            row += [_fmt(cell["mean"]), _fmt(cell["std"]), str(cell["count"]), str(cell["failures"]), mark]
        rows.append(row)
    return header, rows


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def render_csv(report: dict) -> str:
    header, rows = table_rows(report)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def parse_csv(text: str) -> tuple[list[str], list[list[str]]]:
    reader = list(csv.reader(io.StringIO(text)))
    if not reader:
        raise EmptyInputError("empty table")
    return reader[0], reader[1:]


def render_text(report: dict) -> str:
    """Aligned table: mean ± std per cell; ``*`` marks the best method, ✓/✓✓ its significant wins."""
    best = best_methods(report)
    header = ["method"] + [
        f"{METRIC_LABELS[m]} ({'higher' if DIRECTIONS[m] > 0 else 'lower'} is better)" for m in report["metrics"]
    ]
    body = []
    for method in report["methods"]:
        row = [method]
        for metric in report["metrics"]:
            cell = report["cells"][method][metric]
            text = "n/a" if cell["mean"] is None else f"{cell['mean']:.4f}"
            if cell["std"] is not None:
                text += f" ± {cell['std']:.4f}"
            mark = "*" if best[metric] == method else significance_mark(report, metric, method, best[metric])
            if mark:
                text += f" {mark}"
            if cell["failures"]:
                text += f" [{cell['failures']} failed]"
            row.append(text)
        body.append(row)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# -- curve and interpolation tables -------------------------------------------

def write_rows(rows: list[dict], columns, path: str | None) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    text = buf.getvalue()
    if path:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def read_curves(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({
            "method": row["method"], "k": int(row["k"]), "examples": int(row["examples"]),
            "clamped": int(row["clamped"]), "comprehensiveness": float(row["comprehensiveness"]),
            "sensitivity": float(row["sensitivity"]), "sens_failures": int(row["sens_failures"]),
        })
    return rows
