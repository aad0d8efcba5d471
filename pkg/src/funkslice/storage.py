"""Table files: one JSON header line followed by a CSV body.

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly, so a write/read cycle is bit-exact.  Files are written to
a temporary sibling and renamed into place.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

HEADER_PREFIX = "# "
FORMAT_VERSION = 1


class StorageError(OSError):
    """Unreadable or malformed table file."""


def _atomic_write(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_table(header: dict, columns: dict) -> str:
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    n = len(arrays[0]) if arrays else 0
    if any(len(a) != n for a in arrays):
        raise ValueError("columns differ in length")
    buf = io.StringIO()
    buf.write(HEADER_PREFIX + json.dumps(header, sort_keys=True) + "\n")
    buf.write(",".join(names) + "\n")
    fmts = ["%d" if np.issubdtype(a.dtype, np.integer) else "%.17g" for a in arrays]
    for row in zip(*arrays):
        buf.write(",".join(f % v for f, v in zip(fmts, row)) + "\n")
    return buf.getvalue()


def write_table(path, header: dict, columns: dict):
    header = dict(header, format_version=FORMAT_VERSION)
    _atomic_write(Path(path), format_table(header, columns))


def read_table(path) -> tuple[dict, dict]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if len(lines) < 2 or not lines[0].startswith(HEADER_PREFIX):
        raise StorageError(f"{path}: missing JSON header line")
    try:
        header = json.loads(lines[0][len(HEADER_PREFIX):])
    except json.JSONDecodeError as exc:
        raise StorageError(f"{path}: bad header: {exc}") from exc
    names = lines[1].split(",")
    body = [ln.split(",") for ln in lines[2:] if ln]
    cols = {}
    for i, name in enumerate(names):
        raw = [row[i] for row in body]
        if all(_is_int(v) for v in raw) and name.endswith("index"):
            cols[name] = np.array([int(v) for v in raw], dtype=np.int64)
        else:
            cols[name] = np.array([float(v) for v in raw], dtype=float)
    return header, cols


def _is_int(v: str) -> bool:
    return v.lstrip("-").isdigit()
