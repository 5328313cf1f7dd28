"""Artifact files: CSV matrices and series, versioned JSON documents.

Numbers are written with ``repr(float)``, the shortest decimal string that
reads back to the same binary64 value, so a write/read cycle is exact.
Matrix CSVs have no header; series CSVs start with ``k,y1,...,yN``.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def _fmt(x) -> str:
    return repr(float(x))


def write_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        for row in M:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_matrix(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: not a rectangular numeric matrix")
    return np.array(rows, dtype=float)


def write_series(path, Y) -> None:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["k"] + [f"y{i + 1}" for i in range(Y.shape[1])]) + "\n")
        for k, row in enumerate(Y, start=1):
            fh.write(",".join([str(k)] + [_fmt(v) for v in row]) + "\n")


def read_series(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "k":
            raise ValueError(f"{path}: missing 'k,y1..' header")
        rows = [[float(v) for v in row[1:]] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_json(path, payload: dict, config: dict) -> None:
    from . import __version__

    doc = {
        "format_version": FORMAT_VERSION,
        "tool_version": __version__,
        "config_hash": config_hash(config),
    }
    doc.update(payload)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def read_json(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {doc.get('format_version')!r}")
    return doc


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
