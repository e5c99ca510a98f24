"""Locale-independent writers for series and field snapshots."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = ["format_float", "write_series_csv", "write_field_binary", "read_field_binary"]


def format_float(x) -> str:
    """17 significant digits, '.' as decimal separator."""
    return format(float(x), ".17g")


def write_series_csv(path, columns: dict, preamble: list[str] | None = None):
    """Write equal-length columns to ``path``; ``preamble`` lines become ``#`` comments."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    lengths = {a.shape[0] for a in arrays}
    if len(lengths) > 1:
        raise ValueError("columns have different lengths")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in preamble or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*arrays):
            writer.writerow(
                [str(v) if isinstance(v, (int, np.integer)) else format_float(v) for v in row]
            )
    return path


def write_field_binary(path, values, meta: dict | None = None):
    """Raw little-endian complex64 samples plus a ``.json`` sidecar with the shape."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(np.asarray(values, dtype="<c8"))
    path.write_bytes(arr.tobytes(order="C"))
    sidecar = {
        "dtype": "complex64",
        "byte_order": "little",
        "order": "C",
        "shape": list(arr.shape),
    }
    sidecar.update(meta or {})
    side = path.with_suffix(path.suffix + ".json")
    side.write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
    return path, side


def read_field_binary(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype="<c8")
    return data.reshape(meta["shape"]), meta
