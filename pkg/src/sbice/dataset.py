"""The Dataset value type, CSV interchange, standardization and bootstrap.

A dataset is a rectangular table of covariates X, a strictly binary
treatment T and a real outcome Y. CSV (UTF-8, header row, full-precision
decimals) is the only interchange format; labels are restricted to
[A-Za-z0-9_] so no quoting is ever needed.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .rng import RandomStream

_LABEL_RE = re.compile(r"^[A-Za-z0-9_]+$")
_TRUE = {"1", "true", "True", "TRUE", "1.0"}
_FALSE = {"0", "false", "False", "FALSE", "0.0"}


@dataclass(frozen=True)
class ColumnSchema:
    """Maps CSV columns onto covariates, treatment and outcome."""

    treatment_column: str
    outcome_column: str
    covariate_columns: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "covariate_columns", tuple(self.covariate_columns))
        labels = (*self.covariate_columns, self.treatment_column, self.outcome_column)
        if len(set(labels)) != len(labels):
            raise ConfigurationError("schema labels must be distinct")
        if not self.covariate_columns:
            raise ConfigurationError("schema needs at least one covariate column")
        for lab in labels:
            if not _LABEL_RE.match(lab):
                raise ConfigurationError(f"invalid column label {lab!r}")


@dataclass(frozen=True)
class Dataset:
    """Immutable (X, T, Y) table; arrays are read-only once constructed."""

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    covariate_names: tuple[str, ...]
    treatment_name: str = "t"
    outcome_name: str = "y"

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(np.asarray(self.covariates, dtype=float))
        t = np.asarray(self.treatment, dtype=float)
        y = np.asarray(self.outcome, dtype=float)
        names = tuple(self.covariate_names)
        if x.ndim != 2:
            raise ConfigurationError("covariates must be a 2-D matrix")
        n = x.shape[0]
        if n < 2:
            raise ConfigurationError(f"dataset needs n >= 2 rows, got {n}")
        if t.shape != (n,) or y.shape != (n,):
            raise ConfigurationError("covariates, treatment and outcome must share n")
        if len(names) != x.shape[1]:
            raise ConfigurationError("covariate_names must match covariate columns")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ConfigurationError("dataset contains NaN or infinite values")
        if not np.all((t == 0.0) | (t == 1.0)):
            raise ConfigurationError("treatment must be strictly binary")
        ColumnSchema(self.treatment_name, self.outcome_name, names)
        for arr in (x, t, y):
            arr.setflags(write=False)
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "treatment", t)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def schema(self) -> ColumnSchema:
        return ColumnSchema(self.treatment_name, self.outcome_name,
                            self.covariate_names)

    def matrix(self) -> np.ndarray:
        """Rows flattened to (covariates..., treatment, outcome)."""
        return np.column_stack([self.covariates, self.treatment, self.outcome])


def read_csv(path, schema: ColumnSchema) -> Dataset:
    """Parse a CSV file into a Dataset, rejecting bad rows by index."""
    with open(path, newline="", encoding="utf-8") as fh:
        return _read_rows(csv.reader(fh), schema, str(path))


def read_csv_text(text: str, schema: ColumnSchema) -> Dataset:
    """Parse CSV content already in memory (used by the worker protocol)."""
    return _read_rows(csv.reader(text.splitlines()), schema, "<inline csv>")


def _read_rows(rows, schema: ColumnSchema, origin: str) -> Dataset:
    try:
        header = next(rows)
    except StopIteration:
        raise ConfigurationError(f"{origin}: empty file") from None
    header = [h.strip() for h in header]
    wanted = (*schema.covariate_columns, schema.treatment_column,
              schema.outcome_column)
    missing = [c for c in wanted if c not in header]
    if missing:
        raise ConfigurationError(f"{origin}: missing columns {missing}")
    idx = {c: header.index(c) for c in wanted}

    cov, treat, out = [], [], []
    for row_no, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ConfigurationError(
                f"{origin}: row {row_no} has {len(row)} cells, expected {len(header)}")
        try:
            cov.append([float(row[idx[c]]) for c in schema.covariate_columns])
            out.append(float(row[idx[schema.outcome_column]]))
        except ValueError as exc:
            raise ConfigurationError(f"{origin}: row {row_no}: {exc}") from None
        tcell = row[idx[schema.treatment_column]].strip()
        if tcell in _TRUE:
            treat.append(1.0)
        elif tcell in _FALSE:
            treat.append(0.0)
        else:
            raise ConfigurationError(
                f"{origin}: row {row_no}: treatment value {tcell!r} is not binary")
    if not cov:
        raise ConfigurationError(f"{origin}: no data rows")
    try:
        return Dataset(np.array(cov, dtype=float), np.array(treat),
                       np.array(out), schema.covariate_columns,
                       treatment_name=schema.treatment_column,
                       outcome_name=schema.outcome_column)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{origin}: {exc}") from None


def write_csv(dataset: Dataset, path) -> None:
    """Serialize with shortest round-trip decimals; column order = schema order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(format_csv(dataset))


def format_csv(dataset: Dataset) -> str:
    lines = [",".join((*dataset.covariate_names, dataset.treatment_name,
                       dataset.outcome_name))]
    t_int = dataset.treatment.astype(int)
    for i in range(dataset.n):
        cells = [repr(float(v)) for v in dataset.covariates[i]]
        cells.append(str(t_int[i]))
        cells.append(repr(float(dataset.outcome[i])))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Standardizer:
    """Per-column mean/sd from a reference dataset; treatment is untouched.

    Columns with zero spread keep sd = 1 so standardizing is a no-op on them.
    Statistics always come from the source dataset and are reused for every
    generated dataset, giving all distance evaluations one metric space.
    """

    covariate_mean: np.ndarray
    covariate_sd: np.ndarray
    outcome_mean: float
    outcome_sd: float

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "Standardizer":
        cm = dataset.covariates.mean(axis=0)
        cs = dataset.covariates.std(axis=0)
        cs = np.where(cs > 0.0, cs, 1.0)
        om = float(dataset.outcome.mean())
        os_ = float(dataset.outcome.std())
        return cls(cm, cs, om, os_ if os_ > 0.0 else 1.0)

    def transform(self, dataset: Dataset) -> Dataset:
        return Dataset((dataset.covariates - self.covariate_mean) / self.covariate_sd,
                       dataset.treatment,
                       (dataset.outcome - self.outcome_mean) / self.outcome_sd,
                       dataset.covariate_names, dataset.treatment_name,
                       dataset.outcome_name)

    def inverse(self, dataset: Dataset) -> Dataset:
        return Dataset(dataset.covariates * self.covariate_sd + self.covariate_mean,
                       dataset.treatment,
                       dataset.outcome * self.outcome_sd + self.outcome_mean,
                       dataset.covariate_names, dataset.treatment_name,
                       dataset.outcome_name)


def standardize(dataset: Dataset, standardizer: Standardizer) -> Dataset:
    return standardizer.transform(dataset)


def bootstrap_covariates(source: Dataset, n: int, stream: RandomStream) -> np.ndarray:
    """n covariate rows resampled uniformly with replacement from the source."""
    if n < 1:
        raise ConfigurationError(f"bootstrap size must be >= 1, got {n}")
    gen = stream.generator()
    idx = gen.integers(0, source.n, size=n)
    return source.covariates[idx].copy()
