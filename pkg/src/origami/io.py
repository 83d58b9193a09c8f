"""Reading and writing loss matrices, probes, trees and partitions.

Loss matrices are stored one action per row.  A CSV file may start with a
header row of outcome names and each row may start with an action name;
both are detected by the first cell failing to parse as a number.  The
JSON form is ``{"actions": [...], "outcomes": [...], "entries": [[...]]}``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from origami.folding import FoldTree, Partition
from origami.simplex import LossMatrix, as_prob


class InputError(ValueError):
    """Malformed input file; the message carries the file position."""

    def __init__(self, message: str, path=None, line: Optional[int] = None, column: Optional[int] = None):
        self.path, self.line, self.column = path, line, column
        where = str(path) if path is not None else "<input>"
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _parse_table(text: str, path=None, labelled: bool = True):
    """Numeric rows from CSV text plus the optional header and row labels."""
    rows = [(n, row) for n, row in enumerate(csv.reader(io.StringIO(text)), start=1)
            if row and any(cell.strip() for cell in row)]
    if not rows:
        raise InputError("no data rows", path)
    header = None
    first_line, first = rows[0]
    # a row whose only non-number is a leading label is data, anything else is a header
    tail = first[1:] if labelled and len(first) > 1 else first
    if not all(_is_number(c) for c in tail):
        header = [c.strip() for c in first]
        rows = rows[1:]
        if not rows:
            raise InputError("header without data rows", path, first_line)
    has_labels = labelled and not _is_number(rows[0][1][0])
    labels, values = [], []
    width = None
    for line, row in rows:
        cells = [c.strip() for c in row]
        if has_labels:
            labels.append(cells[0])
            cells = cells[1:]
        offset = 2 if has_labels else 1
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise InputError(f"expected {width} values, found {len(cells)}", path, line)
        parsed = []
        for k, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                raise InputError(f"not a number: {cell!r}", path, line, k + offset) from None
            if not math.isfinite(v):
                raise InputError(f"non-finite value {cell!r}", path, line, k + offset)
            parsed.append(v)
        values.append(parsed)
    if header is not None and has_labels and len(header) == width + 1:
        header = header[1:]
    if header is not None and len(header) != width:
        raise InputError(f"header has {len(header)} names for {width} columns", path, first_line)
    return np.array(values, dtype=float), header, (labels if has_labels else None)


def parse_loss_csv(text: str, path=None) -> LossMatrix:
    values, header, labels = _parse_table(text, path)
    return LossMatrix(values, actions=labels, outcomes=header)


def parse_loss_json(text: str, path=None) -> LossMatrix:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(exc.msg, path, exc.lineno, exc.colno) from None
    if isinstance(data, dict):
        key = "entries" if "entries" in data else "loss"
        if key not in data:
            raise InputError("missing 'entries' key", path)
        rows, actions, outcomes = data[key], data.get("actions"), data.get("outcomes")
    else:
        rows, actions, outcomes = data, None, None
    try:
        arr = np.array(rows, dtype=float)
    except (TypeError, ValueError):
        raise InputError("loss must be a numeric matrix", path) from None
    if arr.ndim != 2 or arr.size == 0:
        raise InputError("loss must be a non-empty 2-d matrix", path)
    if not np.all(np.isfinite(arr)):
        r, c = np.argwhere(~np.isfinite(arr))[0]
        raise InputError(f"non-finite entry at row {r}, column {c}", path)
    try:
        return LossMatrix(arr, actions=actions, outcomes=outcomes)
    except ValueError as exc:
        raise InputError(str(exc), path) from None


def read_loss(path) -> LossMatrix:
    """Load a loss matrix from ``.csv`` or ``.json``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(exc.strerror or str(exc), path) from None
    if path.suffix.lower() == ".json":
        return parse_loss_json(text, path)
    return parse_loss_csv(text, path)


def format_float(v: float) -> str:
    return repr(float(v))


def loss_to_csv(L, actions: Optional[Sequence[str]] = None, outcomes: Optional[Sequence[str]] = None) -> str:
    if isinstance(L, LossMatrix):
        actions = actions or L.actions
        outcomes = outcomes or L.outcomes
    arr = np.asarray(L, dtype=float)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if outcomes is not None:
        writer.writerow((["action"] if actions is not None else []) + list(outcomes))
    for k, row in enumerate(arr):
        writer.writerow(([actions[k]] if actions is not None else []) + [format_float(v) for v in row])
    return buf.getvalue()


def read_probe(path, dim: Optional[int] = None) -> np.ndarray:
    """Probability vectors stored one per CSV row (no labels)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(exc.strerror or str(exc), path) from None
    values, _, _ = _parse_table(text, path, labelled=False)
    if dim is not None and values.shape[1] != dim:
        raise InputError(f"probe has {values.shape[1]} columns, expected {dim}", path)
    try:
        return as_prob(values)
    except ValueError as exc:
        raise InputError(str(exc), path) from None


def dumps(data) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_text(text)


def write_json(path, data) -> None:
    write_text(path, dumps(data))


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise InputError(exc.strerror or str(exc), path) from None
    except json.JSONDecodeError as exc:
        raise InputError(exc.msg, path, exc.lineno, exc.colno) from None


def read_tree(path) -> FoldTree:
    data = read_json(path)
    try:
        return FoldTree.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid fold tree: {exc}", path) from None


def read_partition(path) -> Partition:
    data = read_json(path)
    try:
        return Partition.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid partition: {exc}", path) from None


def rows_to_csv(rows: List[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v
