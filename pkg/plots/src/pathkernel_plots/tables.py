"""CSV loading and validation for sweep and trace tables.

The sweep schema is fixed by the producing CLI:
``gamma,phi_avg,se_phi,dphi,se_dphi,n_samples,overflow_count`` plus optional
extra numeric columns (e.g. ``phi_avg_det``).  Loading is strict: every cell
must parse as a number, the gamma grid must be strictly increasing, and
errors name the offending row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

SWEEP_COLUMNS = ("gamma", "phi_avg", "se_phi", "dphi", "se_dphi", "n_samples", "overflow_count")


class TableError(ValueError):
    """The input CSV does not satisfy the expected schema."""


def _read_numeric_csv(path: str) -> tuple:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise TableError(f"{path}: file is empty") from None
            rows = list(reader)
    except OSError as exc:
        raise TableError(f"cannot read {path}: {exc}") from None
    header = [h.strip() for h in header]
    data = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise TableError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise TableError(
                    f"{path}: row {i + 2}, column {header[j]!r}: not a number: {cell!r}"
                ) from None
    return header, data


@dataclass(frozen=True)
class SweepTable:
    """Validated sweep results, one row per parameter value."""

    columns: tuple
    data: np.ndarray  # shape (n_rows, n_columns)

    def __len__(self) -> int:
        return self.data.shape[0]

    def col(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise TableError(f"no column {name!r}; have {list(self.columns)}") from None

    @property
    def has_deterministic(self) -> bool:
        return "phi_avg_det" in self.columns


def load_sweep_table(path: str) -> SweepTable:
    header, data = _read_numeric_csv(path)
    missing = [c for c in SWEEP_COLUMNS if c not in header]
    if missing:
        raise TableError(f"{path}: missing sweep columns {missing}; have {header}")
    if data.shape[0] == 0:
        raise TableError(f"{path}: no data rows")
    table = SweepTable(columns=tuple(header), data=data)
    gamma = table.col("gamma")
    if np.any(np.diff(gamma) <= 0):
        bad = int(np.argmax(np.diff(gamma) <= 0)) + 2
        raise TableError(f"{path}: gamma must be strictly increasing (violated at row {bad + 1})")
    return table


@dataclass(frozen=True)
class TraceTable:
    """A single-orbit time series: a time column plus coordinate columns."""

    columns: tuple
    data: np.ndarray

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def time(self) -> np.ndarray:
        return self.data[:, self.columns.index("t")]

    @property
    def coordinate_names(self) -> tuple:
        return tuple(c for c in self.columns if c != "t")

    def coordinate(self, name: str) -> np.ndarray:
        if name not in self.columns or name == "t":
            raise TableError(f"no coordinate column {name!r}; have {list(self.coordinate_names)}")
        return self.data[:, self.columns.index(name)]


def load_trace_table(path: str) -> TraceTable:
    header, data = _read_numeric_csv(path)
    if "t" not in header:
        raise TableError(f"{path}: trace needs a 't' column; have {header}")
    if len(header) < 2:
        raise TableError(f"{path}: trace needs at least one coordinate column")
    if data.shape[0] == 0:
        raise TableError(f"{path}: no data rows")
    return TraceTable(columns=tuple(header), data=data)
