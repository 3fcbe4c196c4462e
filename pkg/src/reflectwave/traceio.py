"""Trace persistence: lossless CSV with the canonical nine-column header.

Floats render via repr (shortest round-trip decimal), so write-then-read
reproduces every sample bit for bit.  Files are written with LF endings;
the reader tolerates CRLF.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .params import Trace, TRACE_COLUMNS

__all__ = ["TRACE_HEADER", "TraceFormatError", "write_trace", "read_trace"]

TRACE_HEADER = ",".join(TRACE_COLUMNS)


class TraceFormatError(ValueError):
    """Malformed trace file; message names the first offending line."""


def write_trace(trace: Trace, path: str | Path) -> None:
    cols = [trace.column(name).tolist() for name in TRACE_COLUMNS]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(TRACE_HEADER + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(x) for x in row) + "\n")


def read_trace(path: str | Path) -> Trace:
    path = Path(path)
    with open(path, encoding="ascii", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TraceFormatError(f"{path}: line 1: empty file")
    if lines[0].strip() != TRACE_HEADER:
        raise TraceFormatError(
            f"{path}: line 1: bad header (expected {TRACE_HEADER!r})")
    n_cols = len(TRACE_COLUMNS)
    data: list[list[float]] = [[] for _ in range(n_cols)]
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n_cols:
            raise TraceFormatError(
                f"{path}: line {lineno}: expected {n_cols} fields, "
                f"got {len(parts)}")
        try:
            for col, text in zip(data, parts):
                col.append(float(text))
        except ValueError:
            raise TraceFormatError(
                f"{path}: line {lineno}: not a number: {text!r}") from None
    arrays = {name: np.asarray(col)
              for name, col in zip(TRACE_COLUMNS, data)}
    return Trace(**arrays)
