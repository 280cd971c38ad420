"""Tabular data loading, preprocessing and train/validation/test splitting."""

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .exceptions import SchemaError

__all__ = [
    "ColumnSchema",
    "RawTable",
    "Dataset",
    "Split",
    "MISSING_TOKENS",
    "load_schema",
    "load_csv",
    "one_hot",
    "preprocess",
    "split",
    "bundled_dataset",
]

MISSING_TOKENS = ["", "?", "NA"]
KINDS = ("numeric", "categorical", "response")
TASKS = ("regression", "binary-classification")


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")


def _check_schema(schema):
    schema = [c if isinstance(c, ColumnSchema) else ColumnSchema(**c) for c in schema]
    n_resp = sum(c.kind == "response" for c in schema)
    if n_resp != 1:
        raise SchemaError(f"schema needs exactly one response column, found {n_resp}")
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names in schema")
    return schema


def load_schema(path):
    """Read a schema file: JSON list of ``{"name": ..., "kind": ...}`` objects.

    A top-level object with a ``"columns"`` key is accepted as well.
    """
    with open(path, encoding="utf-8") as f:
        spec = json.load(f)
    if isinstance(spec, dict):
        spec = spec["columns"]
    return _check_schema(spec)


@dataclass
class RawTable:
    frame: pd.DataFrame
    schema: list
    dropped: int = 0

    @property
    def n_rows(self):
        return len(self.frame)

    @property
    def response(self):
        return next(c.name for c in self.schema if c.kind == "response")

    @property
    def feature_columns(self):
        return [c for c in self.schema if c.kind != "response"]


def load_csv(path, schema):
    """Load a comma-separated file with a header row.

    Rows containing any missing cell (empty, ``?`` or ``NA``) are dropped and
    counted in ``RawTable.dropped``. Numeric and response columns must parse
    as floats; categorical columns are kept as stripped strings.
    """
    schema = _check_schema(schema)
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_values=MISSING_TOKENS,
            skipinitialspace=True,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{path}: empty file") from exc
    frame.columns = [c.strip() for c in frame.columns]
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")

    expected = [c.name for c in schema]
    for name in frame.columns:
        if name not in expected:
            raise SchemaError(f"{path}: unknown column {name!r}")
    for name in expected:
        if name not in frame.columns:
            raise SchemaError(f"{path}: missing column {name!r}")
    frame = frame[expected]

    frame = frame.apply(lambda s: s.str.strip() if s.dtype == object else s)
    frame = frame.replace(MISSING_TOKENS, np.nan)
    keep = frame.notna().all(axis=1)
    dropped = int((~keep).sum())
    frame = frame[keep].reset_index(drop=True)

    for col in schema:
        if col.kind == "categorical":
            continue
        parsed = pd.to_numeric(frame[col.name], errors="coerce")
        bad = parsed.isna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise SchemaError(
                f"{path}: unparsable numeric cell {frame[col.name][row]!r} "
                f"in column {col.name!r}"
            )
        frame[col.name] = parsed.astype(np.float64)
    return RawTable(frame=frame, schema=schema, dropped=dropped)


def one_hot(values, levels):
    """Indicator matrix for ``values`` over ``levels``; unseen values give a zero row."""
    values = np.asarray(values)
    return (values[:, None] == np.asarray(levels)[None, :]).astype(np.float64)


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    task: str
    feature_names: list
    means: np.ndarray
    stds: np.ndarray
    response_min: float = 0.0
    response_max: float = 1.0
    class_labels: Optional[tuple] = None
    dropped_features: list = field(default_factory=list)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def inverse_response(self, y):
        """Map scaled regression targets back to the original units."""
        return np.asarray(y) * (self.response_max - self.response_min) + self.response_min

    def subset(self, idx):
        return self.X[idx], self.y[idx]


def preprocess(raw, task, fit_indices):
    """Encode, standardize and scale ``raw`` using statistics of ``fit_indices`` only.

    Categorical columns become full one-hot indicator sets (levels seen on the
    fit rows). All resulting feature columns, indicators included, are
    standardized to zero mean and unit (population) variance on the fit rows.
    Regression responses are mapped linearly onto [0, 1] with the fit-row
    min/max; classification responses are coded 0/1 by sorted label.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    fit = np.asarray(fit_indices, dtype=int)
    if fit.size == 0:
        raise ValueError("fit_indices must be non-empty")
    frame = raw.frame

    blocks, names = [], []
    for col in raw.feature_columns:
        values = frame[col.name].to_numpy()
        if col.kind == "numeric":
            blocks.append(values.astype(np.float64)[:, None])
            names.append(col.name)
        else:
            levels = sorted(set(values[fit]))
            unseen = sorted(set(values) - set(levels))
            if unseen:
                warnings.warn(
                    f"column {col.name!r}: levels {unseen} not present in fit rows; "
                    "encoded as all-zero indicators",
                    stacklevel=2,
                )
            blocks.append(one_hot(values, levels))
            names.extend(f"{col.name}={lvl}" for lvl in levels)
    X = np.hstack(blocks) if blocks else np.empty((len(frame), 0))

    means = X[fit].mean(axis=0)
    stds = X[fit].std(axis=0)
    constant = stds < 1e-12
    dropped = [nm for nm, c in zip(names, constant) if c]
    if dropped:
        warnings.warn(f"dropping zero-variance features: {dropped}", stacklevel=2)
    X = (X[:, ~constant] - means[~constant]) / stds[~constant]
    names = [nm for nm, c in zip(names, constant) if not c]

    y_raw = frame[raw.response].to_numpy()
    if task == "regression":
        y_raw = y_raw.astype(np.float64)
        lo, hi = float(y_raw[fit].min()), float(y_raw[fit].max())
        if hi <= lo:
            raise ValueError("response is constant on the fit rows")
        y = (y_raw - lo) / (hi - lo)
        labels = None
    else:
        labels = tuple(sorted(set(y_raw.tolist())))
        if len(labels) != 2:
            raise ValueError(f"binary classification needs 2 response levels, got {labels}")
        y = (y_raw == labels[1]).astype(np.float64)
        lo, hi = 0.0, 1.0

    return Dataset(
        X=X,
        y=y,
        task=task,
        feature_names=names,
        means=means[~constant],
        stds=stds[~constant],
        response_min=lo,
        response_max=hi,
        class_labels=labels,
        dropped_features=dropped,
    )


@dataclass(frozen=True)
class Split:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    seed: int

    @property
    def fit_idx(self):
        return self.train_idx


def split(n, seed, test_fraction=0.2, val_fraction=0.2):
    """Seeded shuffle into train / validation / test index sets.

    ``round(test_fraction * n)`` rows go to test; ``val_fraction`` of the
    remainder goes to validation; the rest is training data.
    """
    if n < 10:
        raise ValueError(f"need at least 10 rows to split, got {n}")
    n_test = int(np.floor(test_fraction * n + 0.5))
    n_val = int(np.floor(val_fraction * (n - n_test) + 0.5))
    n_train = n - n_test - n_val
    if min(n_test, n_val, n_train) < 1:
        raise ValueError(f"n={n} too small for non-empty train/val/test splits")
    perm = np.random.default_rng(seed).permutation(n)
    return Split(
        train_idx=perm[:n_train],
        val_idx=perm[n_train : n_train + n_val],
        test_idx=perm[n_train + n_val :],
        seed=seed,
    )


BUNDLED = {
    "abalone": "regression",
    "mammographic": "binary-classification",
}


def bundled_path(name, suffix=".csv"):
    return Path(str(resources.files("steinit") / "data" / f"{name}{suffix}"))


def bundled_dataset(name):
    """Return ``(raw_table, task)`` for one of the bundled datasets."""
    if name not in BUNDLED:
        raise KeyError(f"no bundled dataset {name!r}; choose from {sorted(BUNDLED)}")
    schema = load_schema(bundled_path(name, ".schema.json"))
    return load_csv(bundled_path(name), schema), BUNDLED[name]
