"""CSV tables: fixed column order, RFC-4180 quoting, stable float formatting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Table", "format_value", "write_csv", "to_csv_text", "split_complex"]


def format_value(v) -> str:
    """Render one cell. Floats use 10 significant digits so reruns compare byte for byte."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v == 0.0:
            return "0"
        return format(v, ".10g")
    if isinstance(v, (complex, np.complexfloating)):
        raise TypeError("complex cells must be split into _re/_im columns first")
    if isinstance(v, (list, tuple)):
        return ";".join(format_value(x) for x in v)
    return str(v)


def split_complex(name: str, z) -> dict:
    z = complex(z)
    return {f"{name}_re": z.real, f"{name}_im": z.imag}


@dataclass
class Table:
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, row: dict) -> None:
        unknown = set(row) - set(self.columns)
        if unknown:
            raise KeyError(f"columns not in table: {sorted(unknown)}")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r.get(name) is None else r.get(name) for r in self.rows], dtype=float)


def _write(fh, table: Table) -> None:
    w = csv.writer(fh, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([format_value(row.get(c)) for c in table.columns])


def to_csv_text(table: Table) -> str:
    buf = io.StringIO()
    _write(buf, table)
    return buf.getvalue()


def write_csv(table: Table, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write(fh, table)
    return path
