"""Parsers for the experiment CLI's CSV and codebook file formats."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class FigureInputError(Exception):
    """An input file is missing, malformed, or inconsistent."""


def read_sweep_csv(path: str | Path) -> tuple[dict, list[dict]]:
    """Parse one sweep CSV into (metadata, rows).

    Metadata comes from the ``# key=value`` header lines and must include a
    ``config_digest``; rows are dicts keyed by the CSV column names with
    numeric fields converted to float where possible.
    """
    path = Path(path)
    if not path.exists():
        raise FigureInputError(f"input file {path} does not exist")
    meta: dict[str, str] = {}
    data_lines: list[str] = []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            elif line:
                data_lines.append(line)
    if "config_digest" not in meta:
        raise FigureInputError(
            f"{path} carries no config_digest header; refusing to plot "
            f"untracked data"
        )
    reader = csv.reader(data_lines)
    try:
        columns = next(reader)
    except StopIteration:
        raise FigureInputError(f"{path} has no column header") from None
    rows = []
    for rec in reader:
        row: dict[str, object] = {}
        for col, cell in zip(columns, rec):
            try:
                row[col] = float(cell)
            except ValueError:
                row[col] = cell
        rows.append(row)
    if not rows:
        raise FigureInputError(f"{path} contains no data rows")
    return meta, rows


def read_codebook(path: str | Path) -> dict:
    """Parse a codebook JSON file; entries become a complex ndarray."""
    path = Path(path)
    if not path.exists():
        raise FigureInputError(f"input file {path} does not exist")
    with open(path) as f:
        raw = json.load(f)
    for key in ("T", "M", "entries", "method"):
        if key not in raw:
            raise FigureInputError(f"{path} lacks codebook field {key!r}")
    entries = np.asarray(raw["entries"], dtype=float)
    raw["points"] = entries[..., 0] + 1j * entries[..., 1]
    return raw


def require_same_grid(labeled: list[tuple[str, list[dict]]],
                      column: str = "snr_db") -> np.ndarray:
    """The shared sweep grid of several CSVs, or an error if they differ."""
    grids = {}
    for label, rows in labeled:
        grids[label] = np.array(sorted({float(r[column]) for r in rows}))
    first_label = next(iter(grids))
    first = grids[first_label]
    for label, grid in grids.items():
        if len(grid) != len(first) or not np.allclose(grid, first):
            raise FigureInputError(
                f"inputs {first_label!r} and {label!r} were swept over "
                f"different {column} grids and cannot be compared"
            )
    return first
