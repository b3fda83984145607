"""CSV loading, table merging, derived columns and missing-value imputation.

Tables are immutable wrappers around a pandas DataFrame; every operation
returns a new table. Imputation is intentionally simple (column median /
mode) and reported per column so the substitution is auditable; the strategy
sits behind ``impute`` so a heavier mixed-type imputer can be swapped in.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

MISSING_TOKENS = ("", "NA")


class CsvParseError(ValueError):
    """Ragged or otherwise unparseable CSV input."""


class MergeKeyError(ValueError):
    """The designated key column is missing, duplicated or incomplete."""


class SchemaError(KeyError):
    """A referenced column does not exist."""


class ColumnTypeError(TypeError):
    """A derived-column source is not numeric."""


class UnimputableColumnError(ValueError):
    """A column with no observed values cannot be imputed."""


class RawTable:
    """A rectangular table of mixed numeric/categorical columns.

    Numeric columns are float64 with NaN for missing cells; categorical
    columns are object dtype with None for missing cells.
    """

    def __init__(self, df: pd.DataFrame, key_column: str | None = None):
        self.df = df.reset_index(drop=True)
        self.key_column = key_column
        if key_column is not None:
            _check_key(self.df, key_column)

    @property
    def columns(self) -> list[str]:
        return list(self.df.columns)

    @property
    def n_rows(self) -> int:
        return len(self.df)

    def missing_count(self) -> int:
        return int(self.df.isna().sum().sum())

    def is_numeric(self, column: str) -> bool:
        if column not in self.df.columns:
            raise SchemaError(f"unknown column {column!r}")
        return pd.api.types.is_numeric_dtype(self.df[column])

    def column_values(self, column: str) -> np.ndarray:
        if column not in self.df.columns:
            raise SchemaError(f"unknown column {column!r}")
        return self.df[column].to_numpy()


def _check_key(df: pd.DataFrame, key: str) -> None:
    if key not in df.columns:
        raise MergeKeyError(f"key column {key!r} not present")
    col = df[key]
    if col.isna().any():
        raise MergeKeyError(f"key column {key!r} has missing values")
    dup = col[col.duplicated()]
    if len(dup):
        raise MergeKeyError(f"key column {key!r} has duplicate value {dup.iloc[0]!r}")


def _infer_column(cells: list[str | None]) -> np.ndarray | list:
    """Float column if every non-missing cell parses as a number, else object."""
    parsed: list[float] = []
    for c in cells:
        if c is None:
            parsed.append(math.nan)
            continue
        try:
            parsed.append(float(c))
        except ValueError:
            return [None if c is None else c for c in cells]
    return np.array(parsed, dtype=float)


def parse_csv(text: str, key_column: str | None = None, source: str = "<csv>") -> RawTable:
    """Parse RFC-4180 CSV text with a header row into a RawTable.

    Empty strings and the literal "NA" become missing cells. Ragged rows are
    an error naming the 1-based data row; duplicate keys are a merge-key
    error.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CsvParseError(f"{source}: file is empty (no header row)") from None
    rows: list[list[str | None]] = []
    for i, row in enumerate(reader, start=1):
        if len(row) != len(header):
            raise CsvParseError(
                f"{source}: row {i} has {len(row)} cells, expected {len(header)}"
            )
        rows.append([None if cell in MISSING_TOKENS else cell for cell in row])
    columns = {}
    for j, name in enumerate(header):
        columns[name] = _infer_column([r[j] for r in rows])
    df = pd.DataFrame(columns, columns=header)
    if len(df) == 0:
        df = pd.DataFrame({name: [] for name in header})
    return RawTable(df, key_column)


def load_csv(path: str | Path, key_column: str | None = None) -> RawTable:
    """Load an RFC-4180 CSV file; see parse_csv for the cell conventions."""
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    return parse_csv(text, key_column, source=str(path))


def merge(left: RawTable, right: RawTable, key: str) -> RawTable:
    """Inner join on ``key``; name collisions get _x/_y suffixes."""
    for side, table in (("left", left), ("right", right)):
        if key not in table.df.columns:
            raise SchemaError(f"key column {key!r} missing from {side} table")
    merged = left.df.merge(right.df, on=key, how="inner", suffixes=("_x", "_y"))
    return RawTable(merged, key)


@dataclass(frozen=True)
class DerivedColumn:
    """One declarative derived column: gap, pooled_mean, pooled_sd or proportion."""

    op: str
    name: str
    args: dict

    OPS = ("gap", "pooled_mean", "pooled_sd", "proportion")

    def __post_init__(self) -> None:
        if self.op not in self.OPS:
            raise ValueError(f"unknown derived op {self.op!r}")

    def source_columns(self) -> list[str]:
        if self.op == "gap":
            return [self.args["minuend"], self.args["subtrahend"]]
        if self.op in ("pooled_mean", "pooled_sd"):
            cols = list(self.args["cols"])
            return cols + list(self.args.get("weights") or [])
        return [self.args["col"], self.args["total"]]


def parse_derived_spec(doc: str | Sequence[Mapping]) -> list[DerivedColumn]:
    """Parse the JSON derived-column list: [{"op", "name", "args"}, ...]."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    return [DerivedColumn(d["op"], d["name"], dict(d["args"])) for d in doc]


def _numeric_matrix(table: RawTable, cols: Sequence[str]) -> np.ndarray:
    for c in cols:
        if c not in table.df.columns:
            raise SchemaError(f"unknown column {c!r}")
        if not table.is_numeric(c):
            raise ColumnTypeError(f"column {c!r} is not numeric")
    return np.column_stack([table.df[c].to_numpy(dtype=float) for c in cols])


def derive(table: RawTable, spec: Sequence[DerivedColumn]) -> RawTable:
    """Append derived columns; rows with any missing source get a missing cell."""
    df = table.df.copy()
    for item in spec:
        if item.name in df.columns:
            raise ValueError(f"derived column {item.name!r} already exists")
        if item.op == "gap":
            m = _numeric_matrix(table, [item.args["minuend"], item.args["subtrahend"]])
            values = m[:, 0] - m[:, 1]
        elif item.op in ("pooled_mean", "pooled_sd"):
            cols = list(item.args["cols"])
            x = _numeric_matrix(table, cols)
            wcols = item.args.get("weights")
            if wcols:
                w = _numeric_matrix(table, list(wcols))
            else:
                w = np.ones_like(x)
            with np.errstate(invalid="ignore", divide="ignore"):
                mean = (w * x).sum(axis=1) / w.sum(axis=1)
                if item.op == "pooled_mean":
                    values = mean
                else:
                    # population convention: divide by the total weight
                    var = (w * (x - mean[:, None]) ** 2).sum(axis=1) / w.sum(axis=1)
                    values = np.sqrt(var)
        else:
            m = _numeric_matrix(table, [item.args["col"], item.args["total"]])
            values = m[:, 0] / m[:, 1]
        df[item.name] = values
    return RawTable(df, table.key_column)


def _column_mode(values: Iterable) -> str:
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def impute(table: RawTable, seed: int | None = None) -> tuple[RawTable, dict[str, int]]:
    """Fill missing cells: numeric -> column median, categorical -> column mode.

    Mode ties break lexicographically. Returns the filled table and a
    per-column fill-count report. ``seed`` is unused by this strategy but kept
    so randomized imputers can be dropped in behind the same signature.
    """
    df = table.df.copy()
    report: dict[str, int] = {}
    for col in df.columns:
        missing = df[col].isna()
        n_missing = int(missing.sum())
        report[col] = n_missing
        if n_missing == 0:
            continue
        observed = df[col][~missing]
        if len(observed) == 0:
            raise UnimputableColumnError(f"column {col!r} has no observed values")
        if pd.api.types.is_numeric_dtype(df[col]):
            fill = float(np.median(observed.to_numpy(dtype=float)))
        else:
            fill = _column_mode(observed)
        df.loc[missing, col] = fill
    return RawTable(df, table.key_column), report
