"""Categorical tables: CSV ingestion, skew filtering, indicator and contingency matrices.

All operations are pure functions of their inputs and never mutate a dataset in
place, so they are safe to call concurrently.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = [
    "Variable",
    "Schema",
    "CategoricalDataset",
    "IndicatorMatrix",
    "ContingencyMatrix",
    "FilterReport",
    "load_csv",
    "write_csv",
    "skew_filter",
    "indicator",
    "contingency",
]


@dataclass(frozen=True)
class Variable:
    name: str
    categories: tuple[str, ...]

    def __post_init__(self):
        if len(self.categories) < 2:
            raise DataError(f"variable {self.name!r} has {len(self.categories)} category(s); need at least 2")
        if len(set(self.categories)) != len(self.categories):
            raise DataError(f"variable {self.name!r} has duplicate category names")


@dataclass(frozen=True)
class Schema:
    """Ordered variable roster; `target` optionally names the severity outcome variable."""

    variables: tuple[Variable, ...]
    target: str | None = None

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise DataError("duplicate variable names in schema")
        if self.target is not None and self.target not in names:
            raise DataError(f"target {self.target!r} is not a schema variable")

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def index_of(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise DataError(f"unknown variable {name!r}")

    def variable(self, name: str) -> Variable:
        return self.variables[self.index_of(name)]


@dataclass(frozen=True)
class CategoricalDataset:
    """n observations over Q categorical variables, stored as category indices."""

    schema: Schema
    codes: np.ndarray  # (n, Q) int32

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int32)
        object.__setattr__(self, "codes", codes)
        if codes.ndim != 2 or codes.shape[1] != len(self.schema.variables):
            raise DataError("codes shape does not match schema")
        if codes.shape[0] < 1:
            raise DataError("dataset is empty")
        for j, v in enumerate(self.schema.variables):
            col = codes[:, j]
            if col.min() < 0 or col.max() >= len(v.categories):
                raise DataError(f"code out of range for variable {v.name!r}")

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def n_variables(self) -> int:
        return self.codes.shape[1]

    @property
    def target_codes(self) -> np.ndarray | None:
        if self.schema.target is None:
            return None
        return self.codes[:, self.schema.index_of(self.schema.target)]

    @property
    def target_labels(self) -> list[str] | None:
        codes = self.target_codes
        if codes is None:
            return None
        cats = self.schema.variable(self.schema.target).categories
        return [cats[c] for c in codes]


@dataclass(frozen=True)
class IndicatorMatrix:
    """Block one-hot super-indicator: each row carries exactly one 1 per variable block."""

    Z: np.ndarray  # (n, J) uint8
    blocks: tuple[tuple[int, int], ...]  # half-open column range per variable
    var_names: tuple[str, ...]
    categories: tuple[tuple[str, ...], ...]

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def J(self) -> int:
        return self.Z.shape[1]

    @property
    def q(self) -> int:
        return len(self.blocks)

    def column_labels(self) -> list[str]:
        out = []
        for name, cats in zip(self.var_names, self.categories):
            out.extend(f"{name}={c}" for c in cats)
        return out


@dataclass(frozen=True)
class ContingencyMatrix:
    """Cluster-by-category count table (rows sum to q * cluster size)."""

    F: np.ndarray  # (K, J) int64
    grand_total: int


@dataclass
class FilterReport:
    threshold: float
    entries: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"threshold": self.threshold, "variables": self.entries}, indent=2)


def load_csv(
    path: str | Path,
    schema_mode: str = "infer",
    schema: Schema | None = None,
    target: str | None = None,
) -> CategoricalDataset:
    """Read a header-ed CSV (RFC-4180 quoting) into a categorical dataset.

    In ``infer`` mode category indices follow first appearance per column; in
    ``declared`` mode the given schema fixes both the column set and category
    order, and any unseen value is an error naming the offending row/column.
    A blank cell is always an ingestion error: missing data is not supported.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    if schema_mode not in ("infer", "declared"):
        raise DataError(f"unknown schema_mode {schema_mode!r}")
    if schema_mode == "declared" and schema is None:
        raise DataError("declared mode requires a schema")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        rows = list(reader)
    if not rows:
        raise DataError(f"no data rows in {path}")

    if schema_mode == "declared":
        declared = {v.name: v for v in schema.variables}
        missing = [n for n in declared if n not in header]
        if missing:
            raise DataError(f"columns missing from {path}: {missing}")
        col_of = {name: header.index(name) for name in declared}
        var_order = [v.name for v in schema.variables]
        cat_index = {v.name: {c: i for i, c in enumerate(v.categories)} for v in schema.variables}
        out_schema = schema if target is None else Schema(schema.variables, target)
    else:
        if len(set(header)) != len(header):
            raise DataError(f"duplicate column names in {path}")
        var_order = header
        col_of = {name: i for i, name in enumerate(header)}
        cat_index = {name: {} for name in header}
        out_schema = None  # built after the scan

    n, q = len(rows), len(var_order)
    codes = np.empty((n, q), dtype=np.int32)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {r + 2} of {path} has {len(row)} fields, expected {len(header)}")
        for j, name in enumerate(var_order):
            value = row[col_of[name]]
            if value == "":
                raise DataError(f"blank cell at row {r + 2}, column {name!r} in {path}")
            idx = cat_index[name].get(value)
            if idx is None:
                if schema_mode == "declared":
                    raise DataError(
                        f"value {value!r} at row {r + 2}, column {name!r} is not in the declared categories"
                    )
                idx = len(cat_index[name])
                cat_index[name][value] = idx
            codes[r, j] = idx

    if out_schema is None:
        variables = tuple(Variable(name, tuple(cat_index[name])) for name in var_order)
        out_schema = Schema(variables, target)
    return CategoricalDataset(out_schema, codes)


def write_csv(ds: CategoricalDataset, path: str | Path) -> None:
    """Write the dataset back out; `load_csv` on the result round-trips exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.schema.names)
        cats = [v.categories for v in ds.schema.variables]
        for row in ds.codes:
            writer.writerow([cats[j][c] for j, c in enumerate(row)])


def skew_filter(ds: CategoricalDataset, threshold: float = 0.85) -> tuple[CategoricalDataset, FilterReport]:
    """Drop every variable whose modal category share strictly exceeds `threshold`.

    The target variable is reported but never dropped. A share exactly equal to
    the threshold keeps the variable (the rule is "more than").
    """
    if not 0.0 < threshold < 1.0:
        raise DataError(f"threshold must be in (0, 1), got {threshold}")
    report = FilterReport(threshold=threshold)
    keep: list[int] = []
    n = ds.n
    for j, v in enumerate(ds.schema.variables):
        counts = np.bincount(ds.codes[:, j], minlength=len(v.categories))
        modal = int(np.argmax(counts))  # ties: first category in order
        share = counts[modal] / n
        is_target = v.name == ds.schema.target
        kept = is_target or not (share > threshold)
        report.entries.append(
            {
                "variable": v.name,
                "modal_category": v.categories[modal],
                "modal_share": float(share),
                "kept": bool(kept),
            }
        )
        if kept:
            keep.append(j)
    non_target = [j for j in keep if ds.schema.variables[j].name != ds.schema.target]
    if not non_target:
        raise DataError("skew filter dropped every non-target variable; nothing left to analyze")
    new_schema = Schema(tuple(ds.schema.variables[j] for j in keep), ds.schema.target)
    return CategoricalDataset(new_schema, ds.codes[:, keep]), report


def indicator(ds: CategoricalDataset, active_vars: list[str] | None = None) -> IndicatorMatrix:
    """Block one-hot encoding of `active_vars` (all variables when None).

    Variables appear in schema order regardless of the order given.
    """
    if active_vars is None:
        active = list(range(ds.n_variables))
    else:
        if not active_vars:
            raise DataError("active_vars must not be empty")
        active = sorted(ds.schema.index_of(name) for name in active_vars)
    sizes = [len(ds.schema.variables[j].categories) for j in active]
    J = sum(sizes)
    Z = np.zeros((ds.n, J), dtype=np.uint8)
    blocks = []
    start = 0
    for j, size in zip(active, sizes):
        Z[np.arange(ds.n), start + ds.codes[:, j]] = 1
        blocks.append((start, start + size))
        start += size
    return IndicatorMatrix(
        Z=Z,
        blocks=tuple(blocks),
        var_names=tuple(ds.schema.variables[j].name for j in active),
        categories=tuple(ds.schema.variables[j].categories for j in active),
    )


def contingency(Z: IndicatorMatrix, assign: np.ndarray, K: int) -> ContingencyMatrix:
    """Cluster-by-category counts: F[k, j] = #(observations in cluster k with column j set)."""
    assign = np.asarray(assign)
    if assign.shape != (Z.n,):
        raise DataError(f"assignment length {assign.shape} does not match n={Z.n}")
    if assign.min() < 0 or assign.max() >= K:
        raise DataError(f"cluster label out of range [0, {K})")
    F = np.zeros((K, Z.J), dtype=np.int64)
    np.add.at(F, assign, Z.Z.astype(np.int64))
    return ContingencyMatrix(F=F, grand_total=Z.n * Z.q)
