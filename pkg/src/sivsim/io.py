"""Text/CSV exchange formats and atomic output writing."""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_two_column(path, header: str, col_a, col_b) -> None:
    """Two-column text with a one-line header."""
    col_a = np.asarray(col_a)
    col_b = np.asarray(col_b)
    lines = [header]
    lines.extend(f"{a:.9g} {b:.9g}" for a, b in zip(col_a, col_b))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_two_column(path) -> tuple[str, np.ndarray, np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0]
    data = np.array([[float(x) for x in line.split()] for line in lines[1:]])
    return header, data[:, 0], data[:, 1]


def write_csv(path, header: list[str], columns) -> None:
    columns = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(f"{v:.9g}" if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
