"""Atomic CSV/JSON artifact writers with round-trip float formatting."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .verification.moments import jsonable


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: list[str], columns: list, metadata: dict | None = None) -> str:
    """``#key=value`` lines, then the header row, then one row per entry."""
    lines = [f"# {k}={v}" for k, v in (metadata or {}).items()]
    lines.append(",".join(header))
    cols = [np.asarray(c) for c in columns]
    if len({c.shape[0] for c in cols}) > 1:
        raise ValueError("CSV columns differ in length")
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header: list[str], columns: list, metadata: dict | None = None) -> None:
    _atomic_write(path, csv_text(header, columns, metadata))


def json_text(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    _atomic_write(path, json_text(obj))


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of :func:`write_csv`: ``(metadata, header, rows)``."""
    meta = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, val = lines[i][1:].strip().partition("=")
        meta[key] = val
        i += 1
    header = lines[i].split(",")
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[i + 1 :] if ln], dtype=float)
    return meta, header, rows.reshape(-1, len(header))
