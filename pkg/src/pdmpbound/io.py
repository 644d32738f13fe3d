"""Skeleton serialisation as NDJSON or CSV, and deterministic JSON summaries."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import TAG_CODE, ContractError, Skeleton

FORMATS = ("ndjson", "csv")


def _num(value: float):
    # JSON has no infinity; write it as a string so files stay standard.
    value = float(value)
    if math.isfinite(value):
        return value
    return repr(value)


def write_skeleton(sk: Skeleton, path, fmt: str = "ndjson") -> Path:
    """Write one line per record.

    NDJSON objects carry ``t``, ``tag``, ``x``, ``v``, ``frozen`` and
    ``hit`` (true for the pre-kernel snapshot of a boundary event).
    """
    path = Path(path)
    if fmt not in FORMATS:
        raise ContractError(f"unknown format {fmt!r}")
    tags = sk.tags
    if fmt == "ndjson":
        with path.open("w") as fh:
            for k in range(len(sk)):
                rec = {
                    "t": float(sk.t[k]),
                    "tag": tags[k],
                    "x": [float(a) for a in sk.x[k]],
                    "v": [float(a) for a in sk.v[k]],
                    "frozen": [bool(a) for a in sk.frozen[k]],
                    "hit": bool(sk.is_hit[k]),
                }
                fh.write(json.dumps(rec) + "\n")
        return path
    d = sk.dim
    header = ["t", "tag", "hit"] + [f"x{i}" for i in range(d)] + [f"v{i}" for i in range(d)] \
        + [f"frozen{i}" for i in range(d)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(len(sk)):
            w.writerow([repr(float(sk.t[k])), tags[k], int(sk.is_hit[k])]
                       + [repr(float(a)) for a in sk.x[k]] + [repr(float(a)) for a in sk.v[k]]
                       + [int(a) for a in sk.frozen[k]])
    return path


def read_skeleton(path, fmt: str | None = None, clock: float | None = None) -> Skeleton:
    """Load a skeleton written by :func:`write_skeleton` (regions are not stored)."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "ndjson")
    rows = []
    if fmt == "ndjson":
        with path.open() as fh:
            for line in fh:
                r = json.loads(line)
                rows.append((r["t"], r["tag"], r.get("hit", False), r["x"], r["v"], r["frozen"]))
    elif fmt == "csv":
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            d = (len(header) - 3) // 3
            for r in reader:
                rows.append((float(r[0]), r[1], r[2] == "1", [float(a) for a in r[3:3 + d]],
                             [float(a) for a in r[3 + d:3 + 2 * d]], [a == "1" for a in r[3 + 2 * d:]]))
    else:
        raise ContractError(f"unknown format {fmt!r}")
    if not rows:
        raise ContractError("empty skeleton file")
    d = len(rows[0][3])
    sk = Skeleton(d, capacity=len(rows))
    n = len(rows)
    sk._t[:n] = [r[0] for r in rows]
    sk._tag[:n] = [TAG_CODE[r[1]] for r in rows]
    sk._hit[:n] = [r[2] for r in rows]
    sk._x[:n] = np.array([r[3] for r in rows], dtype=float)
    sk._v[:n] = np.array([r[4] for r in rows], dtype=float)
    sk._frozen[:n] = np.array([r[5] for r in rows], dtype=bool)
    sk._speed[:n] = np.nan
    sk._region = [None] * n
    sk._n = n
    sk.clock = float(rows[-1][0]) if clock is None else clock
    return sk


def write_trace(path, columns: dict) -> Path:
    """CSV with one column per entry of ``columns`` (equal-length sequences)."""
    path = Path(path)
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*data):
            w.writerow([_cell(a) for a in row])
    return path


def _cell(a):
    if isinstance(a, (bool, np.bool_)):
        return int(a)
    if isinstance(a, (float, np.floating)):
        return repr(float(a))
    return a


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def write_summary(path, summary: dict) -> Path:
    """Sorted-key JSON, so equal inputs give byte-identical files."""
    path = Path(path)
    path.write_text(json.dumps(_jsonable(summary), sort_keys=True, indent=2) + "\n")
    return path


def skeleton_summary(sk: Skeleton) -> dict:
    return {
        "records": len(sk),
        "clock": sk.clock,
        "event_counts": sk.event_counts(),
        "boundary_stats": sk.stats,
    }
