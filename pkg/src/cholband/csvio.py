"""CSV conventions shared by the command-line tools.

Matrices are headerless comma-separated values with '.' decimals; summary
tables carry one header row; NA is serialized as the literal string "NA".
Factor files stack the unit-lower-triangular T (p rows) on top of one final
row holding the innovation variances.
"""

from pathlib import Path

import numpy as np

from .exceptions import DataError
from .factors import CholeskyFactors


def fmt_value(x) -> str:
    if x is None:
        return "NA"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_matrix(path, matrix) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [",".join(fmt_value(v) for v in row) for row in matrix]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    """Parse a headerless numeric CSV; names the offending cell on failure."""
    path = Path(path)
    rows = []
    width = None
    with path.open() as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataError(f"{path}: row {i} has {len(cells)} cells, expected {width}")
            parsed = []
            for jcol, cell in enumerate(cells, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell at row {i}, column {jcol}: {cell!r}")
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: empty matrix file")
    return np.array(rows, dtype=float)


def write_factor_file(path, factors: CholeskyFactors) -> None:
    stacked = np.vstack([factors.t_matrix(), factors.variances[None, :]])
    write_matrix(path, stacked)


def read_factor_file(path) -> CholeskyFactors:
    stacked = read_matrix(path)
    if stacked.shape[0] != stacked.shape[1] + 1:
        raise DataError(f"{path}: factor file must be (p+1) x p")
    t = stacked[:-1]
    variances = stacked[-1]
    phi = np.eye(t.shape[0]) - t
    return CholeskyFactors.from_phi_matrix(phi, variances)


def write_table(path, header, rows) -> None:
    """Summary-style CSV: one header row, then formatted value rows."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_value(v) if not isinstance(v, str) else v for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_labeled_csv(path, label_column: str):
    """Read a headered CSV with one designated label column.

    Returns (features, labels, feature_names); features must be numeric.
    """
    path = Path(path)
    with path.open() as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise DataError(f"{path}: empty file")
    header = lines[0].split(",")
    if label_column not in header:
        raise DataError(f"{path}: no column named {label_column!r} in header")
    label_idx = header.index(label_column)
    feature_names = [h for i, h in enumerate(header) if i != label_idx]
    features = []
    labels = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise DataError(f"{path}: row {i} has {len(cells)} cells, expected {len(header)}")
        labels.append(cells[label_idx])
        row = []
        for jcol, cell in enumerate(cells):
            if jcol == label_idx:
                continue
            try:
                row.append(float(cell))
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell at row {i}, column {jcol + 1}: {cell!r}")
        features.append(row)
    if not features:
        raise DataError(f"{path}: no data rows")
    return np.array(features, dtype=float), np.array(labels), feature_names


def read_unlabeled_csv(path, feature_count: int = None):
    """Read a headered CSV without a label column (prediction input)."""
    path = Path(path)
    with path.open() as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise DataError(f"{path}: empty file")
    header = lines[0].split(",")
    features = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise DataError(f"{path}: row {i} has {len(cells)} cells, expected {len(header)}")
        row = []
        for jcol, cell in enumerate(cells, start=1):
            try:
                row.append(float(cell))
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell at row {i}, column {jcol}: {cell!r}")
        features.append(row)
    if not features:
        raise DataError(f"{path}: no data rows")
    out = np.array(features, dtype=float)
    if feature_count is not None and out.shape[1] != feature_count:
        raise DataError(f"{path}: expected {feature_count} feature columns, got {out.shape[1]}")
    return out, header
