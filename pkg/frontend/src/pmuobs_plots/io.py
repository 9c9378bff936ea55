"""CSV loading for the scenario artifacts."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class MissingColumnError(KeyError):
    """A required column is absent from the CSV."""


class EmptyDataError(ValueError):
    """The CSV carries no data rows for the requested machine."""


def load_machine_series(path: Path, machine: str, columns: list[str]) -> dict:
    """Rows of one machine from a long-format CSV, as float arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataError(f"{path} is empty")
        for col in ("t", "machine_id", *columns):
            if col not in header:
                raise MissingColumnError(f"{path} has no column {col!r}")
        idx = {col: header.index(col) for col in ("t", "machine_id", *columns)}
        out: dict[str, list[float]] = {c: [] for c in ("t", *columns)}
        for row in reader:
            if row[idx["machine_id"]] != machine:
                continue
            out["t"].append(float(row[idx["t"]]))
            for col in columns:
                out[col].append(float(row[idx[col]]))
    if not out["t"]:
        raise EmptyDataError(f"{path} has no rows for machine {machine!r}")
    return {k: np.asarray(v) for k, v in out.items()}


def load_x2_window(run_dir: Path):
    """Evaluation window recorded in the run manifest, if any."""
    manifest = run_dir / "manifest.json"
    if not manifest.exists():
        return None
    try:
        doc = json.loads(manifest.read_text())
        window = doc["resolved_config"]["report"]["x2_window"]
    except (json.JSONDecodeError, KeyError, TypeError):
        return None
    if isinstance(window, list) and len(window) == 2:
        return float(window[0]), float(window[1])
    return None
