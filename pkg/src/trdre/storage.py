"""File I/O: numeric CSV with an optional header, deterministic JSON.

Dialect: comma separated, '.' decimal, UTF-8, numeric cells only. Leading
lines whose first token is not a number (column headers, '#' comment
lines carrying the resolved config) are skipped on read. Floats are
written with repr, the shortest round-tripping form; integer cells are
written without a decimal point. Every writer goes through a
temp-file-plus-rename so outputs are atomic; identical content therefore
yields byte-identical files.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


class CsvParseError(ValueError):
    """A CSV cell failed to parse; carries path and 1-based line number."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_text_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    write_text_atomic(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_csv(path, rows, header: list[str] | None = None, comment: str | None = None) -> None:
    """Write numeric rows; `comment` becomes a single leading '# ...' line."""
    lines = []
    if comment is not None:
        lines.append("# " + comment)
    if header is not None:
        lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def write_matrix_csv(path, M, comment: str | None = None) -> None:
    write_csv(path, np.asarray(M, dtype=float), header=None, comment=comment)


def write_feature_csv(path, Phi, names: list[str], comment: str | None = None) -> None:
    """Feature matrix with one named column per feature."""
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim != 2 or Phi.shape[1] != len(names):
        raise ValueError(f"feature matrix shape {Phi.shape} does not match {len(names)} names")
    write_csv(path, Phi, header=names, comment=comment)


def read_numeric_csv(path) -> np.ndarray:
    """Read a numeric CSV into a 2-D array, skipping leading header lines.

    Raises FileNotFoundError for a missing path and CsvParseError (with a
    1-based line number) for malformed cells or ragged rows.
    """
    path = Path(path)
    rows: list[list[float]] = []
    width = None
    in_prefix = True
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            if in_prefix:
                try:
                    float(cells[0])
                except ValueError:
                    continue  # header or comment line
                in_prefix = False
            try:
                row = [float(c) for c in cells]
            except ValueError as exc:
                raise CsvParseError(path, line_no, f"non-numeric cell: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CsvParseError(path, line_no, f"expected {width} columns, got {len(row)}")
            rows.append(row)
    if not rows:
        raise CsvParseError(path, 1, "no numeric rows found")
    return np.asarray(rows, dtype=float)
