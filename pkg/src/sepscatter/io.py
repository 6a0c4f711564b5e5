"""CSV tables and JSON reports, written atomically with fixed formatting."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

_NUM = {"type": ["number", "null"]}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "command", "conditions", "solver", "reconstruction",
                 "provenance"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "command": {"enum": ["forward", "invert", "check", "roundtrip", "wave"]},
        "status": {"type": "string"},
        "exit_code": {"enum": [0, 2, 3, 4]},
        "conditions": {
            "type": ["object", "null"],
            "required": ["min_abs_c", "winding", "sup_qF", "corollary_ok",
                         "contraction"],
            "properties": {
                "min_abs_c": _NUM,
                "winding": {"type": ["integer", "null"]},
                "sup_qF": _NUM,
                "corollary_ok": {"type": "boolean"},
                "contraction": {
                    "type": ["object", "null"],
                    "required": ["A", "factor"],
                    "properties": {"A": _NUM, "factor": _NUM},
                },
            },
        },
        "condition7": {
            "type": ["object", "null"],
            "required": ["min_abs_D", "q_at_min", "failing_shells", "eps"],
        },
        "solver": {
            "type": ["object", "null"],
            "required": ["method", "iterations", "residual"],
            "properties": {
                "method": {"type": "string"},
                "iterations": {"type": "integer"},
                "residual": _NUM,
            },
        },
        "reconstruction": {
            "type": ["object", "null"],
            "required": ["lambda_sign", "profile_file"],
            "properties": {
                "lambda_sign": {"enum": [1, -1]},
                "profile_file": {"type": "string"},
            },
        },
        "metrics": {"type": ["object", "null"]},
        "provenance": {
            "type": "object",
            "required": ["grid", "versions", "timestamp"],
            "properties": {
                "grid": {
                    "type": "object",
                    "required": ["L", "N"],
                    "properties": {"L": {"type": "number"},
                                   "N": {"type": "integer"}},
                },
                "versions": {"type": "object"},
                "timestamp": {"type": ["string", "null"]},
            },
        },
    },
}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, header, columns) -> None:
    """Write equal-length numeric columns as CSV with 17 significant digits."""
    columns = [np.asarray(c, float) for c in columns]
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def write_complex_table(path, q, values) -> None:
    values = np.asarray(values, complex)
    write_table(path, ["q", "re", "im"], [q, values.real, values.imag])


def read_table(path, header) -> np.ndarray:
    """Read a CSV with the given header; returns an (n, len(header)) array."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    got = [c.strip() for c in rows[0]]
    if got != list(header):
        raise ValueError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: no data rows")
    try:
        data = np.array([[float(c) for c in r] for r in body], float)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: non-finite values")
    return data


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, allow_nan=False) + "\n"


def write_report(path, report: dict) -> None:
    atomic_write(path, dump_report(report))
