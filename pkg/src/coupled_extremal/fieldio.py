"""Plain-text field dumps with a bit-exact round trip.

Format: a header line ``field,v1,ndim=<d>,N=<n>`` followed by one row of
comma-separated values per grid row (last axis), in C order, each written
with 17 significant digits.
"""

from __future__ import annotations

import os
import re

import numpy as np

from .errors import FormatError
from .grid import Grid, ScalarField

_HEADER = re.compile(r"^field,v1,ndim=(\d+),N=(\d+)$")


def format_field(f: ScalarField) -> str:
    grid = f.grid
    rows = f.values.reshape(-1, grid.resolution)
    lines = [f"field,v1,ndim={grid.ndim},N={grid.resolution}"]
    lines.extend(",".join(f"{x:.17g}" for x in row) for row in rows)
    return "\n".join(lines) + "\n"


def dump_field(f: ScalarField, path) -> None:
    """Write ``f`` to ``path``; parent directories are created."""
    path = os.fspath(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_field(f))


def parse_field(text: str, grid: Grid | None = None) -> ScalarField:
    """Inverse of :func:`format_field`; errors carry the byte offset."""
    header, sep, body = text.partition("\n")
    m = _HEADER.match(header.rstrip("\r"))
    if not m:
        raise FormatError(f"bad header {header[:60]!r}", offset=0)
    ndim, n = int(m.group(1)), int(m.group(2))
    if grid is not None and (grid.ndim, grid.resolution) != (ndim, n):
        raise FormatError(f"expected ndim={grid.ndim}, N={grid.resolution}; "
                          f"file has ndim={ndim}, N={n}", offset=0)
    try:
        target = grid or Grid(ndim, n)
    except ValueError as exc:
        raise FormatError(str(exc), offset=0) from None
    n_rows = target.size // n
    values = np.empty((n_rows, n))
    offset = len(header) + len(sep)
    lines = body.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != n_rows:
        raise FormatError(f"expected {n_rows} rows, found {len(lines)}", offset=offset)
    for i, line in enumerate(lines):
        tokens = line.rstrip("\r").split(",")
        if len(tokens) != n:
            raise FormatError(f"row {i + 1}: expected {n} values, found {len(tokens)}",
                              offset=offset)
        pos = offset
        for k, tok in enumerate(tokens):
            try:
                values[i, k] = float(tok)
            except ValueError:
                raise FormatError(f"row {i + 1}: bad number {tok!r}", offset=pos) from None
            pos += len(tok.encode("ascii", "replace")) + 1
        offset += len(line.encode("ascii", "replace")) + 1
    try:
        return ScalarField(target, values.reshape(target.shape))
    except ValueError as exc:
        raise FormatError(str(exc), offset=len(header) + len(sep)) from None


def load_field(path, grid: Grid | None = None) -> ScalarField:
    """Read a field written by :func:`dump_field`.

    Passing ``grid`` pins the expected resolution; a mismatch raises
    :class:`FormatError`.  Missing or unreadable files raise ``OSError``.
    """
    with open(os.fspath(path), encoding="ascii", newline="") as fh:
        return parse_field(fh.read(), grid)
