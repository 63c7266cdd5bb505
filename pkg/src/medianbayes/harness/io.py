"""Numeric CSV datasets: one observation per row, no header unless asked."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from ..errors import DataFormatError, DomainError

LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_matrix(path: PathLike, *, header: bool = False) -> np.ndarray:
    """Parse a numeric CSV into an (n, k) array.

    Blank lines are skipped. Any non-numeric cell or a row whose width differs from
    the first data row raises DataFormatError naming the file and line.
    """
    source = Path(path)
    if not source.exists():
        raise DataFormatError(f"data file not found: {source}")
    rows: List[List[float]] = []
    width = None
    with source.open(encoding="utf-8", newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if header and lineno == 1:
                continue
            cells = [cell.strip() for cell in record]
            if not any(cells):
                continue
            try:
                values = [float(cell) for cell in cells]
            except ValueError as exc:
                raise DataFormatError(f"{source}:{lineno}: non-numeric value ({exc})") from exc
            if not all(np.isfinite(values)):
                raise DataFormatError(f"{source}:{lineno}: non-finite value")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataFormatError(f"{source}:{lineno}: expected {width} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{source}: no observations")
    LOGGER.debug("Read %s rows x %s columns from %s", len(rows), width, source)
    return np.asarray(rows, dtype=float)


def read_pair(path1: PathLike, path2: PathLike, *, header: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    first = read_matrix(path1, header=header)
    second = read_matrix(path2, header=header)
    if first.shape[1] != second.shape[1]:
        raise DomainError(
            f"dimension mismatch: {path1} has {first.shape[1]} columns, {path2} has {second.shape[1]}"
        )
    return first, second


def write_matrix(path: PathLike, data, *, fmt: str = "%.17g") -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(target, np.atleast_2d(np.asarray(data, dtype=float)), delimiter=",", fmt=fmt)
    return target


def parse_vector(text: str) -> np.ndarray:
    """``"0.1,-0.2"`` -> array([0.1, -0.2])."""
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise DataFormatError(f"cannot parse vector {text!r}: {exc}") from exc
    if not values:
        raise DataFormatError(f"empty vector {text!r}")
    return np.asarray(values, dtype=float)


__all__ = ["parse_vector", "read_matrix", "read_pair", "write_matrix"]
