"""Power tables and their CSV / markdown / JSON renderings."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..bnp_tests import CredibleRegion, TestOutcome

LOGGER = logging.getLogger(__name__)

CSV_FIELDS = [
    "distribution",
    "location",
    "h",
    "method",
    "rejections",
    "replications",
    "power",
    "se",
    "theoretical",
    "error",
]


class RowInfo(NamedTuple):
    key: str
    distribution: str
    location: str
    h: str = ""


@dataclass
class PowerCell:
    rejections: int
    replications: int
    error: Optional[str] = None

    @classmethod
    def from_counts(cls, rejections: int, replications: int) -> "PowerCell":
        if not 0 <= rejections <= replications:
            raise ValueError(f"rejections={rejections} outside [0, {replications}]")
        return cls(rejections, replications)

    @classmethod
    def failed(cls, replications: int, message: str) -> "PowerCell":
        return cls(0, replications, message)

    @property
    def proportion(self) -> Optional[float]:
        if self.error is not None:
            return None
        return self.rejections / self.replications

    @property
    def se(self) -> Optional[float]:
        p = self.proportion
        if p is None:
            return None
        return math.sqrt(p * (1.0 - p) / self.replications)

    def display(self) -> str:
        if self.error is not None:
            return "error"
        return f"{self.proportion:.3f} ± {self.se:.3f}"


@dataclass
class PowerTable:
    methods: List[str]
    rows: List[RowInfo]
    cells: Dict[Tuple[str, str], PowerCell]
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    wall_time: float = 0.0
    theoretical: Dict[str, float] = field(default_factory=dict)

    def cell(self, row_key: str, method: str) -> PowerCell:
        return self.cells[(row_key, method)]

    def column(self, method: str) -> List[Optional[float]]:
        return [self.cells[(row.key, method)].proportion for row in self.rows]

    def records(self) -> List[Dict[str, Any]]:
        out = []
        for row in self.rows:
            for method in self.methods:
                cell = self.cells[(row.key, method)]
                out.append(
                    {
                        "distribution": row.distribution,
                        "location": row.location,
                        "h": row.h,
                        "method": method,
                        "rejections": cell.rejections,
                        "replications": cell.replications,
                        "power": cell.proportion,
                        "se": cell.se,
                        "theoretical": self.theoretical.get(row.key),
                        "error": cell.error,
                    }
                )
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "wall_time_sec": round(self.wall_time, 3),
            "config": self.config,
            "cells": self.records(),
        }


def _csv_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def render_csv(table: PowerTable) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for record in table.records():
        writer.writerow({key: _csv_value(record[key]) for key in CSV_FIELDS})
    return buffer.getvalue()


def _align(rows: Sequence[Sequence[str]]) -> List[str]:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for index, row in enumerate(rows):
        lines.append("| " + " | ".join(cell.ljust(w) for cell, w in zip(row, widths)) + " |")
        if index == 0:
            lines.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
    return lines


def render_markdown(table: PowerTable) -> str:
    """Wide table: one line per row, one column per method (plus theory when present)."""
    show_h = any(row.h for row in table.rows)
    header = ["distribution", "h" if show_h else "location"]
    if table.theoretical:
        header.append("theory")
    header += table.methods
    body: List[List[str]] = [header]
    for row in table.rows:
        line = [row.distribution, row.h if show_h else row.location]
        if table.theoretical:
            value = table.theoretical.get(row.key)
            line.append("" if value is None else f"{value:.3f}")
        line += [table.cells[(row.key, m)].display() for m in table.methods]
        body.append(line)
    replications = table.config.get("replications", "?")
    lines = [
        "# Power study",
        "",
        f"- kind: {table.config.get('kind', '?')}",
        f"- replications: {replications}",
        f"- seed: {table.seed}",
        f"- wall time: {table.wall_time:.1f} s",
        "",
        *_align(body),
    ]
    failed = [(row, m) for row in table.rows for m in table.methods if table.cells[(row.key, m)].error]
    if failed:
        lines += ["", "## Errors", ""]
        lines += [f"- {row.key} / {m}: {table.cells[(row.key, m)].error}" for row, m in failed]
    return "\n".join(lines) + "\n"


def render_json(payload: Any) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2, default=_json_default)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def region_to_dict(region: CredibleRegion) -> Dict[str, Any]:
    return {
        "center": region.center.tolist(),
        "scatter": region.scatter.tolist(),
        "radius_sq": float(region.radius_sq),
        "level": region.level,
        "draws": region.num_draws,
        "ridge": region.ridge,
    }


def outcome_to_dict(outcome: TestOutcome) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "method": outcome.method,
        "statistic": float(outcome.statistic),
        "threshold": float(outcome.threshold),
        "reject": bool(outcome.reject),
        "p_value": None if outcome.p_value is None else float(outcome.p_value),
    }
    for key, value in outcome.diagnostics.items():
        if isinstance(value, CredibleRegion):
            out["credible_region"] = region_to_dict(value)
        elif key != "ridge":
            out[key] = value
    return out


def build_filename(stem: str, suffix: str, kind: Optional[str] = None, seed: Optional[int] = None) -> str:
    """``stem.suffix``, or ``stem_kind_seedN.suffix`` when the run is tagged."""
    name = stem
    if kind:
        name = f"{name}_{kind}"
    if seed is not None:
        name = f"{name}_seed{seed}"
    return f"{name}.{suffix}"


def write_exports(
    table: PowerTable,
    out: Path,
    formats: Sequence[str] = ("csv", "md", "json"),
    *,
    tagged: bool = False,
) -> List[Path]:
    """Write ``out`` with each requested suffix; ``out`` may carry any of them already.

    ``tagged`` appends the study kind and master seed to the file names, so runs of one
    config at different seeds can share a directory.
    """
    kind = table.config.get("kind") if tagged else None
    seed = table.seed if tagged else None
    target = Path(out)
    target.parent.mkdir(parents=True, exist_ok=True)
    stem = target.with_suffix("")
    written: List[Path] = []
    for fmt in formats:
        if fmt == "csv":
            content = render_csv(table)
        elif fmt == "md":
            content = render_markdown(table)
        elif fmt == "json":
            content = render_json(table.to_dict())
        else:
            continue
        path = stem.parent / build_filename(stem.name, fmt, kind, seed)
        path.write_text(content, encoding="utf-8")
        written.append(path)
        LOGGER.info("Wrote %s", path)
    return written


__all__ = [
    "PowerCell",
    "PowerTable",
    "RowInfo",
    "outcome_to_dict",
    "region_to_dict",
    "render_csv",
    "render_json",
    "render_markdown",
    "build_filename",
    "write_exports",
]
