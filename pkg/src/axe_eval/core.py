"""Shared data model: datasets, explanations, evaluation configs and reports."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

TARGET_COLUMN = "target"
LABEL_THRESHOLD = 0.5


class AxeError(Exception):
    """Base class for toolkit errors."""


class ConfigError(AxeError, ValueError):
    """Invalid hyperparameter or configuration value."""


class BoundsError(ConfigError):
    """An index or count is outside its allowed range."""


class DataError(AxeError):
    """Input data could not be ingested or is malformed."""


class CapabilityError(AxeError):
    """The model does not support the requested operation (e.g. gradients)."""


class FitError(AxeError):
    """A model could not be fitted to the given data."""


def _population_stats(features: np.ndarray) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    mean = features.mean(axis=0)
    std = features.std(axis=0)  # ddof=0: population convention
    constant = tuple(int(j) for j in np.flatnonzero(std == 0.0))
    if constant:
        std = std.copy()
        std[list(constant)] = 1.0
    return mean, std, constant


@dataclass(frozen=True, eq=False)
class Dataset:
    """A ``rows x features`` numeric matrix with column names and optional labels.

    ``mean``/``std`` hold population statistics. For a dataset returned by
    :func:`standardize` they are the statistics of the *source* data, so that
    :meth:`destandardize` can map points back.
    """

    features: np.ndarray
    column_names: tuple[str, ...]
    labels: np.ndarray | None = None
    mean: np.ndarray = field(default=None)  # type: ignore[assignment]
    std: np.ndarray = field(default=None)  # type: ignore[assignment]
    constant_columns: tuple[int, ...] = ()
    is_standardized: bool = False

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} column names for {X.shape[1]} columns")
        X.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "column_names", names)
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (X.shape[0],):
                raise DataError("labels must be a vector with one entry per row")
            if not np.all((y == 0) | (y == 1)):
                raise DataError("labels must be 0/1")
            y = y.astype(np.int8)
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)
        if self.mean is None or self.std is None:
            mean, std, constant = _population_stats(X)
            object.__setattr__(self, "mean", mean)
            object.__setattr__(self, "std", std)
            object.__setattr__(self, "constant_columns", constant)
            if constant:
                logger.warning(
                    "constant columns %s assigned stddev 1", [names[j] for j in constant]
                )

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def column_index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise ConfigError(f"unknown feature name {name!r}") from None

    def destandardize(self, points: np.ndarray) -> np.ndarray:
        if not self.is_standardized:
            return np.asarray(points, dtype=np.float64)
        return np.asarray(points) * self.std + self.mean

    def with_labels(self, labels) -> "Dataset":
        return Dataset(
            self.features, self.column_names, labels, self.mean, self.std,
            self.constant_columns, self.is_standardized,
        )


def standardize(ds: Dataset) -> Dataset:
    """Z-score every column using population statistics.

    Constant columns map to 0. The returned dataset keeps the source
    statistics for inverse transforms. Standardizing twice is a no-op.
    """
    if ds.is_standardized:
        return ds
    Z = (ds.features - ds.mean) / ds.std
    return Dataset(Z, ds.column_names, ds.labels, ds.mean, ds.std, ds.constant_columns, True)


def top_n_features(importances, n: int) -> np.ndarray:
    """Indices of the ``n`` largest ``|importance|`` values.

    Ties go to the lower feature index.
    """
    e = np.asarray(importances, dtype=np.float64)
    if not 1 <= n <= e.shape[-1]:
        raise BoundsError(f"n={n} outside [1, {e.shape[-1]}]")
    return feature_ranking(e)[..., :n]


def bottom_n_features(importances, n: int) -> np.ndarray:
    """The last ``n`` entries of :func:`feature_ranking` (least important first)."""
    e = np.asarray(importances, dtype=np.float64)
    if not 1 <= n <= e.shape[-1]:
        raise BoundsError(f"n={n} outside [1, {e.shape[-1]}]")
    return feature_ranking(e)[..., ::-1][..., :n]


def feature_ranking(importances) -> np.ndarray:
    """Full ranking by descending magnitude; works row-wise on 2-D input."""
    e = np.abs(np.asarray(importances, dtype=np.float64))
    # stable sort on -|e| keeps ascending index order among ties
    return np.argsort(-e, axis=-1, kind="stable")


@dataclass(frozen=True, eq=False)
class Explanation:
    importances: np.ndarray
    datapoint_index: int
    explainer_id: str

    def __post_init__(self):
        e = np.array(self.importances, dtype=np.float64)
        if e.ndim != 1 or not np.all(np.isfinite(e)):
            raise ConfigError("explanation must be a finite 1-D vector")
        e.setflags(write=False)
        object.__setattr__(self, "importances", e)

    def top_n(self, n: int) -> np.ndarray:
        return top_n_features(self.importances, n)


@dataclass(frozen=True, eq=False)
class GroundTruthExplanation:
    importances: np.ndarray

    def __post_init__(self):
        e = np.array(self.importances, dtype=np.float64)
        if e.ndim != 1 or not np.all(np.isfinite(e)):
            raise ConfigError("ground truth must be a finite 1-D vector")
        object.__setattr__(self, "importances", e)


@dataclass(frozen=True)
class EvalConfig:
    top_n: int = 1
    k_neighbors: int = 5
    perturb_width: float = 0.5
    perturb_samples: int = 1000
    seed: int = 0
    aggregate_auc: bool = False

    def __post_init__(self):
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be >= 1")
        if not self.perturb_width > 0:
            raise ConfigError("perturb_width must be positive")
        if self.perturb_samples < 1:
            raise ConfigError("perturb_samples must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def validate_for(self, n_features: int) -> None:
        if self.top_n > n_features:
            raise BoundsError(f"top_n={self.top_n} exceeds number of features {n_features}")


@dataclass(frozen=True, eq=False)
class QualityReport:
    """Per-datapoint quality values and their mean.

    ``aggregate`` is always ``mean(per_point)``; it is derived, never passed in.
    """

    metric_id: str
    per_point: np.ndarray
    n: int | str | None = None
    curve: tuple[tuple[int, float], ...] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        q = np.array(self.per_point, dtype=np.float64)
        if q.ndim != 1 or q.size == 0:
            raise ConfigError("per_point must be a non-empty vector")
        q.setflags(write=False)
        object.__setattr__(self, "per_point", q)
        if self.curve is not None:
            object.__setattr__(
                self, "curve", tuple((int(a), float(b)) for a, b in self.curve)
            )

    @property
    def aggregate(self) -> float:
        return float(np.mean(self.per_point))

    def to_dict(self) -> dict:
        d = {
            "metric": self.metric_id,
            "n": self.n,
            "per_point": [float(v) for v in self.per_point],
            "aggregate": self.aggregate,
        }
        if self.curve is not None:
            d["curve"] = [[a, b] for a, b in self.curve]
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QualityReport":
        known = {"metric", "n", "per_point", "aggregate", "curve"}
        curve = d.get("curve")
        return cls(
            metric_id=d["metric"],
            per_point=np.asarray(d["per_point"], dtype=np.float64),
            n=d.get("n"),
            curve=tuple(tuple(c) for c in curve) if curve is not None else None,
            extra={k: v for k, v in d.items() if k not in known},
        )


def substream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for one datapoint, derived from ``(seed, index)``."""
    return np.random.default_rng([int(seed), int(index)])


# ---------------------------------------------------------------- CSV I/O


def read_dataset_csv(path) -> Dataset:
    """Read a headered numeric CSV; an optional ``target`` column holds 0/1 labels."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"empty data file: {path}") from None
        rows = [r for r in reader if r]
    if not rows:
        raise DataError(f"no data rows in {path}")
    if len(set(header)) != len(header):
        raise DataError(f"duplicate column names in {path}")
    try:
        table = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"non-numeric value in {path}: {exc}") from None
    if table.shape[1] != len(header):
        raise DataError(f"ragged rows in {path}")
    labels = None
    if TARGET_COLUMN in header:
        j = header.index(TARGET_COLUMN)
        labels = table[:, j]
        if not np.all((labels == 0) | (labels == 1)):
            raise DataError(f"column {TARGET_COLUMN!r} must contain only 0/1")
        table = np.delete(table, j, axis=1)
        header = header[:j] + header[j + 1:]
    if not header:
        raise DataError(f"no feature columns in {path}")
    return Dataset(table, tuple(header), labels)


def write_dataset_csv(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = list(ds.column_names)
        if ds.labels is not None:
            header.append(TARGET_COLUMN)
        w.writerow(header)
        for i in range(ds.n_rows):
            row = [repr(float(v)) for v in ds.features[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            w.writerow(row)


def write_explanations_csv(importances: np.ndarray, path, indices: Sequence[int] | None = None) -> None:
    E = np.asarray(importances, dtype=np.float64)
    if indices is None:
        indices = range(E.shape[0])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["datapoint_index"] + [f"feature_{j + 1}" for j in range(E.shape[1])])
        for i, row in zip(indices, E):
            w.writerow([int(i)] + [repr(float(v)) for v in row])


def read_explanations_csv(path, n_rows: int | None = None, n_features: int | None = None) -> np.ndarray:
    """Read an explanation-set CSV into a ``rows x features`` matrix ordered by datapoint index."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"explanation file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "datapoint_index":
            raise DataError(f"{path}: header must start with 'datapoint_index'")
        rows = [r for r in reader if r]
    width = len(header) - 1
    if n_features is not None and width != n_features:
        raise DataError(f"{path}: {width} feature columns, expected {n_features}")
    try:
        idx = [int(r[0]) for r in rows]
        vals = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if vals.ndim != 2 or vals.shape[1] != width or not np.all(np.isfinite(vals)):
        raise DataError(f"{path}: malformed explanation rows")
    count = n_rows if n_rows is not None else len(rows)
    if sorted(idx) != list(range(count)):
        raise DataError(f"{path}: expected exactly one explanation per datapoint 0..{count - 1}")
    out = np.empty((count, width))
    out[idx] = vals
    return out
