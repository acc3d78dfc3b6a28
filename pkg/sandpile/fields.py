"""Text format for nodal and cell fields.

Line 1 holds the dimension followed by the per-axis count ("1 n" or
"2 n n"), every following line one value in row-major order, written with
17 significant digits so that a round trip is exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import numpy.typing as npt
from loguru import logger

from sandpile.errors import FieldFormatError
from sandpile.grid import Grid


def write_field(path: Path | str, d: int, count: int, values: npt.ArrayLike) -> Path:
    path = Path(path)
    data = np.asarray(values, dtype=np.float64).ravel()
    if data.size != count**d:
        raise FieldFormatError(f"{data.size} values do not fill a {d}D field of {count} per axis")
    header = " ".join([str(d)] + [str(count)] * d)
    path.parent.mkdir(parents=True, exist_ok=True)
    with Path.open(path, "w") as f:
        f.write(header + "\n")
        f.writelines(f"{v:.17g}\n" for v in data)
    logger.debug(f"Wrote {d}D field ({data.size} values) to {path}")
    return path


def read_field(path: Path | str) -> tuple[int, int, npt.NDArray[np.float64]]:
    """Return (d, count per axis, flat values)."""
    path = Path(path)
    if not path.exists():
        raise FieldFormatError(f"Field file {path} not found")
    lines = path.read_text().split("\n")
    try:
        header = [int(tok) for tok in lines[0].split()]
    except ValueError as e:
        raise FieldFormatError(f"{path}:1: malformed header {lines[0]!r}") from e
    if len(header) < 2 or header[0] not in (1, 2) or len(header) != header[0] + 1:
        raise FieldFormatError(f"{path}:1: header must be 'd n' or 'd n n', got {lines[0]!r}")
    d, count = header[0], header[1]
    if any(c != count for c in header[1:]):
        raise FieldFormatError(f"{path}:1: only square grids are supported")
    values = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            values.append(float(line))
        except ValueError as e:
            raise FieldFormatError(f"{path}:{lineno}: not a number: {line!r}") from e
    data = np.asarray(values, dtype=np.float64)
    if data.size != count**d:
        raise FieldFormatError(f"{path}: expected {count**d} values, found {data.size}")
    if not np.all(np.isfinite(data)):
        raise FieldFormatError(f"{path}: non-finite values")
    return d, count, data


def write_nodal(path: Path | str, grid: Grid, u: npt.ArrayLike) -> Path:
    return write_field(path, grid.d, grid.n, grid.check_nodal(u))


def read_nodal(path: Path | str, grid: Grid) -> npt.NDArray[np.float64]:
    d, count, data = read_field(path)
    if (d, count) != (grid.d, grid.n):
        raise FieldFormatError(
            f"{path}: field is {d}D with {count} nodes per axis, grid is {grid.d}D with {grid.n}"
        )
    return data


def write_cells(path: Path | str, grid: Grid, values: npt.ArrayLike) -> Path:
    return write_field(path, grid.d, grid.n + 1, values)


def read_cells(path: Path | str, grid: Grid) -> npt.NDArray[np.float64]:
    d, count, data = read_field(path)
    if (d, count) != (grid.d, grid.n + 1):
        raise FieldFormatError(
            f"{path}: field is {d}D with {count} cells per axis, grid has {grid.n + 1}"
        )
    return data
