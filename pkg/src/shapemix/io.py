"""Plain-text file formats used by the command line.

Sample files hold one decimal literal per line; blank lines and lines
starting with ``#`` are ignored. With a column selector the lines are split
on commas, and a non-numeric first row is treated as a header. Weights files
hold ``index,value`` rows with 1-based indices.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

from .exceptions import ParseError


def fmt(v: float) -> str:
    """17 significant digits; integral values keep a trailing ``.0``."""
    s = format(float(v) + 0.0, ".17g")
    if all(ch not in s for ch in ".eEn"):
        s += ".0"
    return s


def _content_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line and not line.startswith("#"):
                yield lineno, line


def _to_float(token, path, lineno):
    try:
        v = float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", path, lineno) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {token!r}", path, lineno)
    return v


def read_samples(path, column: Optional[str] = None, normalize: bool = False) -> np.ndarray:
    """Read a sample file, optionally selecting a comma-separated column."""
    values = []
    col_idx = None
    first = True
    for lineno, line in _content_lines(path):
        if column is None:
            values.append(_to_float(line, path, lineno))
            continue
        fields = [f.strip() for f in line.split(",")]
        if first:
            first = False
            if column.isdigit():
                col_idx = int(column) - 1
                if col_idx < 0:
                    raise ParseError("column numbers start at 1", path, lineno)
            try:
                [float(f) for f in fields]
                numeric = True
            except ValueError:
                numeric = False
            if not numeric:
                if col_idx is None:
                    if column not in fields:
                        raise ParseError(f"column {column!r} not in header", path, lineno)
                    col_idx = fields.index(column)
                continue
            if col_idx is None:
                raise ParseError(f"column {column!r} given by name but the file has no header",
                                 path, lineno)
        if col_idx >= len(fields):
            raise ParseError(f"row has {len(fields)} fields, column {col_idx + 1} requested",
                             path, lineno)
        values.append(_to_float(fields[col_idx], path, lineno))
    if not values:
        raise ParseError("no samples found", path)
    x = np.array(values)
    if normalize:
        lo, hi = x.min(), x.max()
        if not hi > lo:
            raise ParseError("cannot normalise: all samples are equal", path)
        x = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    return x


def write_values(path, values: Iterable[float]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in values:
            fh.write(fmt(v) + "\n")


def read_values(path) -> np.ndarray:
    return np.array([_to_float(line, path, n) for n, line in _content_lines(path)])


def write_weights(path, w: Sequence[float]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, v in enumerate(w, start=1):
            fh.write(f"{i},{fmt(v)}\n")


def read_weights(path, tol: float = 1e-6) -> np.ndarray:
    """Parse ``index,value`` rows; indices must run 1..M in order."""
    vals = []
    for lineno, line in _content_lines(path):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ParseError("expected 'index,value'", path, lineno)
        try:
            idx = int(parts[0])
        except ValueError:
            raise ParseError(f"bad index {parts[0]!r}", path, lineno) from None
        if idx != len(vals) + 1:
            raise ParseError(f"expected index {len(vals) + 1}, found {idx}", path, lineno)
        v = _to_float(parts[1], path, lineno)
        if v < -1e-12:
            raise ParseError("weights must be nonnegative", path, lineno)
        vals.append(max(v, 0.0))
    if not vals:
        raise ParseError("no weights found", path)
    w = np.array(vals)
    if abs(math.fsum(w) - 1.0) > tol:
        raise ParseError(f"weights sum to {math.fsum(w)!r}, not 1", path)
    return w


def write_trace(path, trace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("k,f,L,fw_gap,subiters,step\n")
        for r in trace.records:
            fh.write(f"{r.k},{fmt(r.f)},{fmt(r.L)},{fmt(r.fw_gap)},{r.subiters},{r.step}\n")
