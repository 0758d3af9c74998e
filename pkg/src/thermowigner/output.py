"""Deterministic data files and run manifests.

Series rows are written as CSV and/or JSONL with round-trip-exact numbers
(``repr`` of a Python float is the shortest string that parses back to the
same double). Output is streamed row by row, and a file is only moved into
place once it is complete, so an I/O failure never leaves a partial file
behind.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import os
import platform
from contextlib import ExitStack
from importlib import metadata
from pathlib import Path
from typing import Iterable, Sequence

import numba
import numpy as np

from .sampling import RNG_DESCRIPTION

SERIES_COLUMNS = (
    "time", "trajectory", "mode", "Q", "P", "xi1", "xi2", "chi1", "chi2", "H_mode", "H_conserved", "kappa",
)  # fmt: skip
_INT_COLUMNS = {"trajectory", "mode"}
FORMAT_SUFFIX = {"csv": ".csv", "jsonl": ".jsonl"}


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover
        return "0+unknown"


def _cell(value, column):
    if column in _INT_COLUMNS:
        return int(value)
    return float(value)


class _AtomicFile:
    """Write to ``<path>.partial`` and rename over ``path`` on success."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.tmp = self.path.with_name(self.path.name + ".partial")
        self.fh = None

    def __enter__(self):
        self.fh = open(self.tmp, "w", encoding="utf-8", newline="")
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        try:
            self.fh.close()
        finally:
            if exc_type is None:
                os.replace(self.tmp, self.path)
            else:
                self.tmp.unlink(missing_ok=True)
        return False


def write_series(
    records: Iterable[Sequence],
    stem,
    formats: Sequence[str] = ("csv",),
    columns: Sequence[str] = SERIES_COLUMNS,
) -> list[Path]:
    """Stream series rows to ``<stem>.csv`` and/or ``<stem>.jsonl``.

    Parameters
    ----------
    records : iterable of sequences
        Rows in :data:`SERIES_COLUMNS` order. Consumed once.
    stem : path-like
        Output path without suffix.
    formats : sequence of {"csv", "jsonl"}
    columns : sequence of str
        Ordered subset of :data:`SERIES_COLUMNS` to keep.

    Returns
    -------
    list of Path
        Files written. On any error they are removed before re-raising.
    """
    columns = tuple(columns)
    unknown = set(columns) - set(SERIES_COLUMNS)
    if unknown:
        raise ValueError(f"unknown series columns {sorted(unknown)}")
    picks = [SERIES_COLUMNS.index(c) for c in columns]
    stem = Path(stem)
    paths = [stem.with_name(stem.name + FORMAT_SUFFIX[f]) for f in formats]
    with ExitStack() as stack:
        handles = [stack.enter_context(_AtomicFile(p)) for p in paths]
        writers = []
        for fmt, fh in zip(formats, handles):
            if fmt == "csv":
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(columns)
                writers.append(("csv", w))
            else:
                writers.append(("jsonl", fh))
        for row in records:
            cells = [_cell(row[k], c) for k, c in zip(picks, columns)]
            for fmt, w in writers:
                if fmt == "csv":
                    w.writerow([repr(v) for v in cells])
                else:
                    w.write(json.dumps(dict(zip(columns, cells))) + "\n")
    return paths


def read_series(path) -> list[tuple]:
    """Read a file produced by :func:`write_series` back into typed rows."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        if path.suffix == ".csv":
            reader = csv.reader(fh)
            columns = next(reader)
            return [tuple(_cell(v if c in _INT_COLUMNS else float(v), c) for v, c in zip(r, columns)) for r in reader]
        rows = [json.loads(line) for line in fh]
    return [tuple(_cell(v, c) for c, v in r.items()) for r in rows]


def write_csv(header: Sequence[str], rows: Iterable[Sequence], path) -> Path:
    """Stream rows to CSV; floats are written with ``repr``."""
    path = Path(path)
    with _AtomicFile(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return path


def write_jsonl(records: Iterable[dict], path) -> Path:
    """Stream JSON records, one per line."""
    path = Path(path)
    with _AtomicFile(path) as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return path


def write_text(text: str, path) -> Path:
    path = Path(path)
    with _AtomicFile(path) as fh:
        fh.write(text)
    return path


def utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def build_manifest(config, command: str, started: str, finished: str, checks: dict | None = None, files=()) -> dict:
    """Everything needed to reproduce a run: resolved config, seed, RNG scheme and build versions."""
    return {
        "command": command,
        "tool_version": tool_version(),
        "seed": config.ensemble.seed,
        "rng": RNG_DESCRIPTION,
        "build": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "numba": numba.__version__,
        },
        "started": started,
        "finished": finished,
        "config": config.to_dict(),
        "resolved_thermostats": [
            {"mode": m.index, "M1": t.M1, "M2": t.M2, "g": t.g}
            for m, t in zip(config.field.modes, config.thermostats())
        ],
        "checks": checks or {},
        "files": [Path(f).name for f in files],
    }


def write_manifest(manifest: dict, path) -> Path:
    return write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", path)
