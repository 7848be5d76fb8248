"""Text formats: PA coefficient files and complex S-matrix CSV."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .frontend import CouplingMatrix, PaParams

__all__ = [
    "read_pa_params",
    "write_pa_params",
    "format_complex",
    "parse_complex",
    "read_s_matrix",
    "write_s_matrix",
]

_FAMILIES = ("chi", "eta", "gamma")


def read_pa_params(path: str | Path) -> PaParams:
    """Read a PA coefficient file.

    One coefficient per line as ``<family> <order> <re> <im>`` where family is
    ``chi``, ``eta`` or ``gamma``. Blank lines and ``#`` comments are ignored.
    Orders must be contiguous (``chi``/``eta`` from 1, ``gamma`` from 2).
    """
    coeffs: dict[str, dict[int, complex]] = {f: {} for f in _FAMILIES}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4 or parts[0] not in _FAMILIES:
            raise ValueError(f"{path}:{lineno}: expected '<chi|eta|gamma> <order> <re> <im>'")
        fam, order = parts[0], int(parts[1])
        coeffs[fam][order] = complex(float(parts[2]), float(parts[3]))

    def ordered(fam: str, first: int) -> list[complex]:
        orders = sorted(coeffs[fam])
        if orders and orders != list(range(first, first + len(orders))):
            raise ValueError(f"{path}: {fam} orders must be contiguous from {first}, got {orders}")
        return [coeffs[fam][o] for o in orders]

    return PaParams(chi=ordered("chi", 1), eta=ordered("eta", 1), gamma=ordered("gamma", 2))


def write_pa_params(p: PaParams, path: str | Path) -> None:
    lines = ["# family order re im"]
    for fam, first in (("chi", 1), ("eta", 1), ("gamma", 2)):
        for i, c in enumerate(getattr(p, fam)):
            lines.append(f"{fam} {first + i} {float(c.real)!r} {float(c.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_complex(z: complex) -> str:
    z = complex(z)
    sign = "-" if np.signbit(z.imag) else "+"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


def parse_complex(text: str) -> complex:
    """Parse ``a+bi`` / ``a-bi`` / ``a`` / ``bi`` cells (``j`` accepted too)."""
    t = text.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(t)
    except ValueError as exc:
        raise ValueError(f"cannot parse complex value {text!r}") from exc


def read_s_matrix(path: str | Path) -> CouplingMatrix:
    """Load a square complex matrix from CSV, one row per line, ``a+bi`` cells."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [[parse_complex(c) for c in row] for row in csv.reader(fh) if row]
    S = np.array(rows, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"{path}: S-matrix must be square, got shape {S.shape}")
    np.fill_diagonal(S, 0.0)
    return CouplingMatrix(S)


def write_s_matrix(S, path: str | Path) -> None:
    S = S.S if isinstance(S, CouplingMatrix) else np.asarray(S)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in S:
            writer.writerow([format_complex(v) for v in row])
