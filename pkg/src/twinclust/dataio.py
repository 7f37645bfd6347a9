"""CSV ingestion and light preprocessing for sample-by-feature data."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .exceptions import DataIOError, EmptyDataset, InvalidInput, ParseError


@dataclass(frozen=True)
class DataMatrix:
    """Samples in rows, features in columns, with optional class labels.

    ``labels`` are remapped to ``0..c-1`` in order of sorted original id;
    ``classes`` keeps the original ids so that ``classes[labels]`` recovers
    them.
    """

    values: np.ndarray
    labels: np.ndarray | None = None
    classes: np.ndarray | None = None
    feature_names: tuple | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidInput(f"expected a 2-D matrix, got shape {values.shape}")
        if values.shape[0] < 2:
            raise EmptyDataset(f"need at least 2 samples, got {values.shape[0]}")
        if values.shape[1] < 1:
            raise EmptyDataset("need at least 1 feature")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("data contains non-finite values")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (values.shape[0],):
                raise InvalidInput(
                    f"label count {labels.size} does not match sample count {values.shape[0]}"
                )
            if self.classes is None:
                classes, labels = remap_labels(labels)
                object.__setattr__(self, "classes", classes)
            object.__setattr__(self, "labels", labels.astype(np.int64))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def D(self) -> int:
        return self.values.shape[1]


def remap_labels(labels):
    """Map arbitrary class ids onto ``0..c-1``.

    Returns ``(classes, remapped)`` with ``classes[remapped] == labels``.
    """
    classes, remapped = np.unique(np.asarray(labels), return_inverse=True)
    return classes, remapped.astype(np.int64)


def _parse_float(cell):
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _resolve_label_column(label_column, header, n_cols):
    if label_column is None:
        return None
    if isinstance(label_column, str):
        try:
            label_column = int(label_column)
        except ValueError:
            if header is None or label_column not in header:
                raise InvalidInput(f"label column {label_column!r} not found in header")
            return header.index(label_column)
    idx = label_column + n_cols if label_column < 0 else label_column
    if not 0 <= idx < n_cols:
        raise InvalidInput(f"label column index {label_column} out of range for {n_cols} columns")
    return idx


def load_csv(path, label_column=None) -> DataMatrix:
    """Read a comma-separated numeric table.

    A single header row is detected when any cell of the first line fails to
    parse as a number. ``label_column`` is a header name or a (possibly
    negative) zero-based column index; label cells may be any token.
    Empty or non-numeric feature cells raise :class:`ParseError` naming the
    1-based row and 0-based column.
    """
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"no such file: {path}")
    try:
        with path.open(newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise EmptyDataset(f"{path} is empty")

    header = None
    first = [c.strip() for c in rows[0]]
    if any(_parse_float(c) is None for c in first):
        header = first
        rows = rows[1:]
        start_row = 2
    else:
        start_row = 1
    n_cols = len(header) if header is not None else len(rows[0]) if rows else 0
    label_idx = _resolve_label_column(label_column, header, n_cols)

    values, raw_labels = [], []
    for offset, row in enumerate(rows):
        lineno = start_row + offset
        if len(row) != n_cols:
            raise ParseError(
                f"row {lineno} has {len(row)} columns, expected {n_cols}", row=lineno
            )
        parsed = []
        for col, cell in enumerate(row):
            cell = cell.strip()
            if col == label_idx:
                raw_labels.append(cell)
                continue
            value = _parse_float(cell)
            if value is None:
                raise ParseError(
                    f"non-numeric or missing value {cell!r} at row {lineno}, column {col}",
                    row=lineno,
                    column=col,
                )
            parsed.append(value)
        values.append(parsed)

    if len(values) < 2:
        raise EmptyDataset(f"{path} holds {len(values)} sample(s); at least 2 required")
    if n_cols - (label_idx is not None) < 1:
        raise EmptyDataset(f"{path} has no feature columns")

    labels = None
    if label_idx is not None:
        numeric = [_parse_float(c) for c in raw_labels]
        if all(v is not None and float(v).is_integer() for v in numeric):
            labels = np.array([int(v) for v in numeric], dtype=np.int64)
        else:
            labels = np.array(raw_labels)
    names = None
    if header is not None:
        names = tuple(h for i, h in enumerate(header) if i != label_idx)
    return DataMatrix(np.array(values, dtype=np.float64), labels=labels, feature_names=names)


def save_csv(data: DataMatrix, path, label_name="label"):
    """Write ``data`` so that :func:`load_csv` with ``label_column=-1`` reloads it."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        names = data.feature_names or tuple(f"x{j}" for j in range(data.D))
        has_labels = data.labels is not None
        writer.writerow(list(names) + ([label_name] if has_labels else []))
        for i, row in enumerate(data.values):
            cells = [repr(float(v)) for v in row]
            if has_labels:
                cells.append(str(data.classes[data.labels[i]]))
            writer.writerow(cells)


def read_labels(path) -> np.ndarray:
    """Read a label file with one integer per line."""
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"no such file: {path}")
    labels = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise ParseError(f"invalid label {line!r} on line {lineno}", row=lineno) from None
    return np.array(labels, dtype=np.int64)


def write_labels(labels, path):
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels))


def standardize(data: DataMatrix) -> DataMatrix:
    """Center every feature and scale it to unit (population) variance.

    Constant features are centered only.
    """
    X = data.values
    centered = X - X.mean(axis=0)
    std = centered.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return replace(data, values=centered / scale)
