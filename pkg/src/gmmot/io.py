"""Delimited-text datasets in, JSON-lines or CSV records out."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InputError(ValueError):
    """Unreadable or malformed input file; message carries file and line."""


@dataclass
class Table:
    features: np.ndarray
    feature_names: list
    labels: np.ndarray | None = None
    chunk_ids: np.ndarray | None = None


def _delimiter(path: Path, text: str) -> str:
    if path.suffix.lower() in (".tsv", ".tab"):
        return "\t"
    first = text.split("\n", 1)[0]
    return "\t" if first.count("\t") > first.count(",") else ","


def read_table(path, label_column: str | None = None, chunk_column: str | None = None,
               require_label: bool = False, require_chunk: bool = False) -> Table:
    """Read a headed CSV/TSV file of numeric columns.

    ``label_column`` and ``chunk_column`` name non-numeric columns pulled out
    of the feature matrix. A label column literally called ``label`` is picked
    up automatically when ``label_column`` is not given.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: cannot read ({exc})") from None
    if not text.strip():
        raise InputError(f"{path}: file is empty")
    reader = csv.reader(io.StringIO(text), delimiter=_delimiter(path, text))
    header = [h.strip() for h in next(reader)]
    if len(set(header)) != len(header):
        raise InputError(f"{path}: line 1: duplicate column names")

    def column(name, required, flag):
        if name is None:
            return None
        if name not in header:
            if required:
                raise InputError(f"{path}: line 1: no column named {name!r} (given by {flag})")
            return None
        return header.index(name)

    label_idx = column(label_column, True, "--label-column") if label_column else column("label", False, "")
    chunk_idx = column(chunk_column, True, "--chunk-column") if chunk_column else None
    if require_label and label_idx is None:
        raise InputError(f"{path}: line 1: a label column is required")
    if require_chunk and chunk_idx is None:
        raise InputError(f"{path}: line 1: a chunk column is required")
    special = {i for i in (label_idx, chunk_idx) if i is not None}
    feat_idx = [i for i in range(len(header)) if i not in special]
    if not feat_idx:
        raise InputError(f"{path}: line 1: no numeric feature columns")

    rows, labels, chunks = [], [], []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise InputError(f"{path}: line {lineno}: expected {len(header)} fields, found {len(rec)}")
        try:
            vals = [float(rec[i]) for i in feat_idx]
        except ValueError:
            bad = next(header[i] for i in feat_idx if not _is_float(rec[i]))
            raise InputError(f"{path}: line {lineno}: column {bad!r} is not numeric") from None
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"{path}: line {lineno}: non-finite value")
        rows.append(vals)
        if label_idx is not None:
            labels.append(rec[label_idx].strip())
        if chunk_idx is not None:
            chunks.append(rec[chunk_idx].strip())
    if not rows:
        raise InputError(f"{path}: no data rows after the header")
    return Table(
        features=np.array(rows, dtype=float),
        feature_names=[header[i] for i in feat_idx],
        labels=np.array(labels) if label_idx is not None else None,
        chunk_ids=np.array(chunks) if chunk_idx is not None else None,
    )


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_table(path, features, names, labels=None, label_column: str = "label") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + ([label_column] if labels is not None else []))
        for k, row in enumerate(np.asarray(features)):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.append(str(labels[k]))
            w.writerow(cells)


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    return value


def format_records(records, fmt: str = "json") -> str:
    """One JSON object per line, or a CSV table over the union of keys.

    CSV cells hold JSON text for nested values and for strings that would
    otherwise read back as numbers or literals, so the table round-trips.
    """
    records = [_jsonable(r) for r in records]
    if fmt == "json":
        return "".join(json.dumps(r, sort_keys=False) + "\n" for r in records)
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    keys = []
    for r in records:
        keys += [k for k in r if k not in keys]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in records:
        w.writerow([_csv_cell(r.get(k)) for k in keys])
    return buf.getvalue()


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        try:
            json.loads(value)
        except json.JSONDecodeError:
            return value
        return json.dumps(value)
    if isinstance(value, float):
        return repr(value)
    return json.dumps(value)


def parse_records(text: str, fmt: str = "json") -> list[dict]:
    """Inverse of :func:`format_records` (CSV cells come back as JSON values where possible)."""
    if fmt == "json":
        return [json.loads(line) for line in text.splitlines() if line.strip()]
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        rec = {}
        for k, v in row.items():
            if v == "":
                rec[k] = None
                continue
            try:
                rec[k] = json.loads(v)
            except json.JSONDecodeError:
                rec[k] = v
        out.append(rec)
    return out
