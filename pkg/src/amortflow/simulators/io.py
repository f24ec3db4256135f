"""CSV ingestion and export of observed datasets.

One row per observation (exchangeable sets) or per time step (series), one
column per data dimension, and a header row naming the columns. An optional
leading ``dataset_id`` column groups rows into several datasets in one file.
"""

import csv

import numpy as np

from amortflow.exceptions import ContractError

DATASET_COLUMN = "dataset_id"


def read_observations(path, data_names=None):
    """Read datasets from ``path``.

    Returns
    -------
    list of (str, ndarray)
        ``(dataset_id, array of shape (rows, D_x))`` in order of first
        appearance. Files without a ``dataset_id`` column hold one dataset
        with id ``"0"``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ContractError(f"{path}: empty file, expected a header row") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    has_id = header[0] == DATASET_COLUMN
    columns = header[1:] if has_id else header
    if data_names is not None and tuple(columns) != tuple(data_names):
        raise ContractError(f"{path}: columns {columns} do not match expected {list(data_names)}")
    groups = {}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ContractError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        key = row[0].strip() if has_id else "0"
        try:
            values = [float(v) for v in (row[1:] if has_id else row)]
        except ValueError:
            raise ContractError(f"{path}:{lineno}: non-numeric value") from None
        groups.setdefault(key, []).append(values)
    if not groups:
        raise ContractError(f"{path}: no observations")
    return [(key, np.asarray(vals, dtype=float).reshape(len(vals), len(columns))) for key, vals in groups.items()]


def write_observations(path, datasets, data_names):
    """Write ``{dataset_id: (rows, D_x) array}`` (or a list of arrays) to CSV."""
    if not isinstance(datasets, dict):
        datasets = {str(i): x for i, x in enumerate(datasets)}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([DATASET_COLUMN, *data_names])
        for key, x in datasets.items():
            for row in np.asarray(x).reshape(len(x), -1):
                writer.writerow([key, *[repr(float(v)) if not float(v).is_integer() else int(v) for v in row]])
