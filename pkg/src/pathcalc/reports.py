"""Report serialization with byte-stable output.

Floats print with 17 significant digits (enough to round-trip IEEE doubles),
dict keys keep insertion order, and line endings are plain newlines, so a
report built from the same configuration and seed serializes to identical
bytes every run. Non-finite floats become null in JSON and literal text in
CSV.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import DomainError
from .verify import CoherenceReport, ConvergenceReport

__all__ = [
    "format_float",
    "json_text",
    "convergence_csv",
    "coherence_csv",
    "report_json_payload",
    "emit_report",
]

CONVERGENCE_COLUMNS = ("level", "value", "reference", "error", "stderr")


def format_float(x: float) -> str:
    return "%.17g" % float(x)


def _json_fragment(value, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return format_float(v) if math.isfinite(v) else "null"
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = ",\n".join(
            f"{inner}{json.dumps(str(k))}: {_json_fragment(v, indent + 1)}"
            for k, v in value.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        flat = all(
            isinstance(v, (int, float, np.integer, np.floating)) for v in value
        )
        if flat:
            return "[" + ", ".join(_json_fragment(v, indent) for v in value) + "]"
        items = ",\n".join(f"{inner}{_json_fragment(v, indent + 1)}" for v in value)
        return "[\n" + items + "\n" + pad + "]"
    raise DomainError(f"cannot serialize {type(value).__name__} to JSON")


def json_text(payload: dict) -> str:
    return _json_fragment(payload, 0) + "\n"


def convergence_csv(report: ConvergenceReport) -> str:
    lines = [",".join(CONVERGENCE_COLUMNS)]
    for row in report.levels:
        lines.append(",".join(format_float(v) for v in row))
    return "\n".join(lines) + "\n"


def coherence_csv(report: CoherenceReport) -> str:
    lines = ["entry,measure_side,endpoint_side,gap"]

    def add(label: str, a: float, b: float) -> None:
        lines.append(
            f"{label},{format_float(a)},{format_float(b)},{format_float(abs(a - b))}"
        )

    add("dt", report.dt_frechet, report.dt_dupire)
    d = report.atom_mu.shape[0]
    for i in range(d):
        add(f"dx[{i}]", report.atom_mu[i], report.dx_dupire[i])
    for i in range(d):
        for j in range(d):
            add(f"dxx[{i}][{j}]", report.atom_lambda[i, j], report.dxx_dupire[i, j])
    return "\n".join(lines) + "\n"


def report_json_payload(report, extra: dict | None = None) -> dict:
    """Ordered JSON payload for a report; ``extra`` entries append at the end,
    except that for coherence reports max_abs_gap always stays last."""
    if isinstance(report, ConvergenceReport):
        payload = {
            "levels": [list(row) for row in report.levels],
            "fitted_order": report.fitted_order,
            "intercept": report.intercept,
            "intercept_stderr": report.intercept_stderr,
        }
        if extra:
            payload.update(extra)
        return payload
    if isinstance(report, CoherenceReport):
        payload = {
            "functional": report.functional,
            "dt_frechet": report.dt_frechet,
            "dt_dupire": report.dt_dupire,
            "atom_mu": report.atom_mu,
            "dx_dupire": report.dx_dupire,
            "atom_lambda": report.atom_lambda,
            "dxx_dupire": report.dxx_dupire,
        }
        if extra:
            payload.update(extra)
        payload["max_abs_gap"] = report.max_abs_gap
        return payload
    if isinstance(report, dict):
        payload = dict(report)
        if extra:
            payload.update(extra)
        return payload
    raise DomainError(f"no JSON payload defined for {type(report).__name__}")


def emit_report(report, fmt: str, path: str | Path) -> Path:
    """Write the report to ``path`` in the requested format and return the path."""
    if fmt == "csv":
        if isinstance(report, ConvergenceReport):
            text = convergence_csv(report)
        elif isinstance(report, CoherenceReport):
            text = coherence_csv(report)
        else:
            raise DomainError(f"no CSV layout for {type(report).__name__}")
    elif fmt == "json":
        text = json_text(report_json_payload(report))
    else:
        raise DomainError(f"unknown report format {fmt!r}; use csv or json")
    out = Path(path)
    out.write_text(text, encoding="utf-8")
    return out
