"""Deterministic text output: fixed-precision JSON, grid-function CSV, atomic writes.

Every float is rendered with 17 significant digits so that repeated runs with
identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

__all__ = [
    "format_float",
    "to_json_text",
    "write_text_atomic",
    "write_grid_function_csv",
    "read_grid_function_csv",
]


def format_float(x: float) -> str:
    """Render a finite float with 17 significant digits."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    return f"{x:.17g}"


def _emit(obj, indent: int) -> str:
    pad = "  " * indent
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for key, value in obj.items():
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            items.append(f'{pad}  {json.dumps(key)}: {_emit(value, indent + 1)}')
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{pad}  {_emit(value, indent + 1)}" for value in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def to_json_text(obj) -> str:
    """Serialize to JSON preserving dict insertion order, 17-digit floats."""
    return _emit(obj, 0) + "\n"


def write_text_atomic(path, text: str) -> None:
    """Write text via a temporary file and rename, so readers never see partial output."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_grid_function_csv(path, nodes, values) -> None:
    """Write a grid function as `node,value` rows."""
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.shape != values.shape or nodes.ndim != 1:
        raise ValueError("nodes and values must be 1-D arrays of equal length")
    lines = ["node,value"]
    lines.extend(f"{format_float(x)},{format_float(v)}" for x, v in zip(nodes, values))
    write_text_atomic(path, "\n".join(lines) + "\n")


def read_grid_function_csv(path):
    """Read a `node,value` file back into a pair of arrays."""
    raw = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not raw or raw[0].strip() != "node,value":
        raise ValueError(f"{path}: expected header 'node,value'")
    nodes, values = [], []
    for lineno, line in enumerate(raw[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected two comma-separated fields")
        try:
            nodes.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return np.asarray(nodes), np.asarray(values)
