"""Dataset model, CSV ingestion, splitting, and COMPAS preparation.

A dataset holds rows ``(a, x, d, s, y)``: binary group label, real
covariate vector, binary decision, binary input prediction and binary
observed outcome. Storage is columnar (numpy arrays); :class:`Record`
gives a row view when one is needed.
"""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when input data fails validation."""


@dataclass(frozen=True)
class Record:
    a: int
    x: tuple[float, ...]
    d: int
    s: int
    y: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Columnar container for ``n`` records with ``p`` covariates.

    Parameters
    ----------
    a, d, s, y : ndarray of shape (n,)
        Binary columns, stored as ``int8``.
    x : ndarray of shape (n, p)
        Covariates; ``p`` may be zero.
    """

    a: np.ndarray
    x: np.ndarray
    d: np.ndarray
    s: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        cols = {}
        for name in ("a", "d", "s", "y"):
            v = np.asarray(getattr(self, name))
            if v.ndim != 1:
                raise DataError(f"column {name} must be one-dimensional")
            if v.size and not np.all((v == 0) | (v == 1)):
                raise DataError(f"column {name} must be binary")
            cols[name] = v.astype(np.int8)
        x = np.asarray(self.x, dtype=float)
        n = cols["a"].shape[0]
        if x.ndim == 1 and x.shape[0] == n and n > 0 and x.size != 0:
            x = x.reshape(n, -1)
        if x.size == 0:
            x = np.zeros((n, 0 if x.ndim < 2 else x.shape[1]))
        if x.ndim != 2 or x.shape[0] != n:
            raise DataError("covariate matrix must have shape (n, p)")
        if not np.all(np.isfinite(x)):
            raise DataError("covariates must be finite")
        if any(c.shape[0] != n for c in cols.values()):
            raise DataError("all columns must have the same length")
        for name, v in cols.items():
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return int(self.a.shape[0])

    @property
    def covariate_dim(self) -> int:
        return int(self.x.shape[1])

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("a", "x", "d", "s", "y")
        )

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.a[idx], self.x[idx], self.d[idx], self.s[idx], self.y[idx])

    def records(self) -> Iterator[Record]:
        for i in range(self.n):
            yield Record(
                int(self.a[i]), tuple(float(v) for v in self.x[i]),
                int(self.d[i]), int(self.s[i]), int(self.y[i]),
            )

    @classmethod
    def from_records(cls, records: Sequence[Record]) -> "Dataset":
        records = list(records)
        if not records:
            raise DataError("empty dataset")
        p = len(records[0].x)
        if any(len(r.x) != p for r in records):
            raise DataError("records have inconsistent covariate dimension")
        x = np.array([r.x for r in records], dtype=float).reshape(len(records), p)
        return cls(
            np.array([r.a for r in records]), x,
            np.array([r.d for r in records]), np.array([r.s for r in records]),
            np.array([r.y for r in records]),
        )

    def validate(self) -> "Dataset":
        """Check the invariants required by the estimation pipeline."""
        if self.n == 0:
            raise DataError("empty dataset")
        if not (np.any(self.a == 0) and np.any(self.a == 1)):
            raise DataError("both groups a=0 and a=1 must be present")
        if not np.any(self.d == 0):
            raise DataError("no records with d=0; outcome regression cannot be fit")
        return self


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

_X_PATTERN = re.compile(r"^x(\d+)$")


@dataclass(frozen=True)
class CsvSchema:
    """Column names for CSV ingestion.

    ``x=None`` selects every header matching ``x<digits>``, ordered by index.
    """

    a: str = "a"
    x: tuple[str, ...] | None = None
    d: str = "d"
    s: str = "s"
    y: str = "y"

    @classmethod
    def from_file(cls, path) -> "CsvSchema":
        """Read a schema from a JSON or TOML key-value file."""
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() == ".toml":
            conf = _parse_flat_toml(text)
        else:
            conf = json.loads(text)
        kwargs = {k: conf[k] for k in ("a", "d", "s", "y") if k in conf}
        if "x" in conf and conf["x"] is not None:
            kwargs["x"] = tuple(conf["x"])
        return cls(**kwargs)

    def covariate_columns(self, header: Sequence[str]) -> tuple[str, ...]:
        if self.x is not None:
            return tuple(self.x)
        found = [(int(m.group(1)), h) for h in header if (m := _X_PATTERN.match(h))]
        return tuple(h for _, h in sorted(found))


def _parse_flat_toml(text: str) -> dict:
    # python 3.10 has no tomllib; schema files only need flat key = value pairs
    try:
        import tomllib  # type: ignore[import-not-found]

        return tomllib.loads(text)
    except ModuleNotFoundError:
        pass
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = json.loads(value.strip().replace("'", '"'))
    return out


_BINARY_NAMES = {"a": "group label", "d": "decision", "s": "input prediction", "y": "outcome"}


def load_csv(path, schema: CsvSchema | None = None) -> Dataset:
    """Load and validate a dataset from a CSV file.

    Parameters
    ----------
    path : path-like
        UTF-8, comma-delimited file with a header row.
    schema : CsvSchema, optional
        Column mapping. Defaults to ``a, x1..xp, d, s, y``.

    Returns
    -------
    Dataset
        Rows in file order.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("empty dataset")
        header = [h.strip() for h in header]
        rows = list(reader)
    xcols = schema.covariate_columns(header)
    needed = [schema.a, *xcols, schema.d, schema.s, schema.y]
    missing = [c for c in needed if c not in header]
    if missing:
        raise DataError(f"missing column(s): {', '.join(missing)}")
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError("empty dataset")
    pos = {h: i for i, h in enumerate(header)}

    binary = {k: np.empty(len(rows), dtype=np.int8) for k in _BINARY_NAMES}
    x = np.empty((len(rows), len(xcols)))
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"row {i} has {len(row)} fields, expected {len(header)}")
        for key, label in _BINARY_NAMES.items():
            cell = row[pos[getattr(schema, key)]].strip()
            if cell == "":
                raise DataError(f"missing {label} at row {i}")
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if v not in (0.0, 1.0):
                raise DataError(f"non-binary {label} at row {i}: {cell!r}")
            binary[key][i - 1] = int(v)
        for j, c in enumerate(xcols):
            cell = row[pos[c]].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"non-numeric covariate {c} at row {i}: {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"non-finite covariate {c} at row {i}")
            x[i - 1, j] = v
    return Dataset(binary["a"], x, binary["d"], binary["s"], binary["y"])


def write_csv(ds: Dataset, path, schema: CsvSchema | None = None) -> None:
    """Write a dataset in the format read by :func:`load_csv`."""
    schema = schema or CsvSchema()
    xcols = schema.x or tuple(f"x{j + 1}" for j in range(ds.covariate_dim))
    if len(xcols) != ds.covariate_dim:
        raise DataError("schema covariate count does not match dataset")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([schema.a, *xcols, schema.d, schema.s, schema.y])
        for i in range(ds.n):
            w.writerow([
                int(ds.a[i]), *(repr(float(v)) for v in ds.x[i]),
                int(ds.d[i]), int(ds.s[i]), int(ds.y[i]),
            ])


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def split_train_test(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random disjoint split; the training part gets ``ceil(fraction * n)`` rows.

    Row order within each part follows the original order.
    """
    if not 0.0 < fraction < 1.0:
        raise DataError("fraction must lie in (0, 1)")
    n = ds.n
    n_train = math.ceil(fraction * n)
    if n_train <= 0 or n_train >= n:
        raise DataError(f"fraction {fraction} yields an empty part for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    train = np.sort(perm[:n_train])
    test = np.sort(perm[n_train:])
    return ds.subset(train), ds.subset(test)


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    n: int
    k: int
    fold_of: np.ndarray = field(repr=False)

    def indices(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == j)

    def complement(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != j)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.k)


def assign_folds(n: int, k: int, seed: int) -> FoldAssignment:
    """Balanced random assignment of ``n`` indices to ``k`` folds."""
    if k < 2:
        raise DataError("fold count k must be at least 2")
    if n < k:
        raise DataError(f"cannot split n={n} records into k={k} folds")
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[np.random.default_rng(seed).permutation(n)] = np.arange(n) % k
    fold_of.setflags(write=False)
    return FoldAssignment(n, k, fold_of)


# ---------------------------------------------------------------------------
# COMPAS
# ---------------------------------------------------------------------------

COMPAS_COLUMNS = (
    "race", "decile_score", "c_jail_in", "c_jail_out", "sex", "age_cat",
    "priors_count", "c_charge_degree", "two_year_recid",
)
COMPAS_FILTER_COLUMNS = ("days_b_screening_arrest", "is_recid", "score_text")
COMPAS_COVARIATES = ("male", "age_lt_25", "age_25_45", "age_gt_45", "priors_count", "felony")


def compas_prepare(raw) -> Dataset:
    """Build a dataset from ProPublica's ``compas-scores-two-years.csv``.

    Applies ProPublica's row filters when their columns are present, keeps
    African-American (``a=0``) and Caucasian (``a=1``) defendants, sets
    ``s = 1`` iff the decile score is at least 5, and ``d = 0`` iff the
    calendar-day difference between jail exit and entry is at most 3.
    Rows with missing jail dates get ``d = 1``.
    """
    import pandas as pd

    df = pd.read_csv(raw)
    missing = [c for c in COMPAS_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"missing column(s): {', '.join(missing)}")
    if all(c in df.columns for c in COMPAS_FILTER_COLUMNS):
        df = df[
            (df["days_b_screening_arrest"] <= 30)
            & (df["days_b_screening_arrest"] >= -30)
            & (df["is_recid"] != -1)
            & (df["c_charge_degree"] != "O")
            & (df["score_text"] != "N/A")
        ]
    df = df[df["race"].isin(["African-American", "Caucasian"])].reset_index(drop=True)
    if df.empty:
        raise DataError("empty dataset")

    try:
        jail_in = pd.to_datetime(df["c_jail_in"], errors="raise").dt.normalize()
        jail_out = pd.to_datetime(df["c_jail_out"], errors="raise").dt.normalize()
    except (ValueError, TypeError) as exc:
        raise DataError(f"unparseable jail dates: {exc}") from None
    days = (jail_out - jail_in).dt.days
    d = np.where(days.notna() & (days <= 3), 0, 1)

    age = df["age_cat"].astype(str)
    x = np.column_stack([
        (df["sex"] == "Male").astype(float),
        (age == "Less than 25").astype(float),
        (age == "25 - 45").astype(float),
        (age == "Greater than 45").astype(float),
        df["priors_count"].astype(float),
        (df["c_charge_degree"] == "F").astype(float),
    ])
    a = (df["race"] == "Caucasian").astype(int).to_numpy()
    s = (df["decile_score"].astype(int) >= 5).astype(int).to_numpy()
    y = df["two_year_recid"].astype(int).to_numpy()
    return Dataset(a, x, d, s, y)
