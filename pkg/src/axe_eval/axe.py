"""AXE: explanation quality as k-NN recovery of the model's own predictions.

For datapoint ``i`` the top-n features of its explanation select the columns a
k-NN voter sees; the voter, trained on the dataset with the model predictions
as targets, predicts row ``i`` (itself left out by default). AXE is the
accuracy of those votes. Only dataset rows are ever used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .core import BoundsError, ConfigError, Dataset, QualityReport, standardize, top_n_features
from .knn import KnnModel, fit_on_matrix
from .models import Model


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    size: int = 0

    def as_dict(self) -> dict:
        return {"hits": self.hits, "misses": self.misses, "size": self.size}


@dataclass(frozen=True, eq=False)
class AxeResult:
    n: int
    k: int
    correct: np.ndarray  # per-point 1/0
    predictions: np.ndarray
    cache: CacheStats = field(default_factory=CacheStats)

    @property
    def score(self) -> float:
        return float(np.mean(self.correct))


def _validate(ds: Dataset, y_preds, E, n: int, k: int, exclude_self: bool) -> tuple[np.ndarray, np.ndarray]:
    E = np.asarray(E, dtype=np.float64)
    y = np.asarray(y_preds)
    if E.shape != (ds.n_rows, ds.n_features):
        raise ConfigError(f"explanations must be {ds.n_rows} x {ds.n_features}, got {E.shape}")
    if y.shape != (ds.n_rows,) or not np.all((y == 0) | (y == 1)):
        raise ConfigError("y_preds must be a 0/1 vector with one entry per row")
    if not 1 <= n <= ds.n_features:
        raise BoundsError(f"n={n} outside [1, {ds.n_features}]")
    limit = ds.n_rows - 1 if exclude_self else ds.n_rows
    if not 1 <= k <= limit:
        raise ConfigError(f"k={k} outside [1, {limit}]" + (" (leave-one-out)" if exclude_self else ""))
    return E, y.astype(np.int64)


def axe_score(ds: Dataset, y_preds, explanations, n: int, k: int, exclude_self: bool = True,
              use_cache: bool = True, cache: dict | None = None) -> AxeResult:
    """AXE_n^k over all rows of ``ds``.

    ``y_preds`` must be the evaluated model's labels on exactly these rows.
    ``cache`` maps a sorted feature subset to its fitted voter and may be shared
    between calls with the same ``(ds, y_preds, k)``.
    """
    E, y = _validate(ds, y_preds, explanations, n, k, exclude_self)
    Z = standardize(ds).features
    tops = top_n_features(E, n)
    keys = [tuple(sorted(row.tolist())) for row in tops]
    predictions = np.empty(ds.n_rows, dtype=np.int8)
    stats = CacheStats()
    if use_cache:
        store: dict[tuple[int, ...], KnnModel] = {} if cache is None else cache
        groups: dict[tuple[int, ...], list[int]] = {}
        for i, key in enumerate(keys):
            groups.setdefault(key, []).append(i)
        for key in sorted(groups):
            rows = groups[key]
            if key in store:
                stats.hits += len(rows)
            else:
                store[key] = fit_on_matrix(Z, y, key, k, exclude_self)
                stats.misses += 1
                stats.hits += len(rows) - 1
            predictions[rows] = store[key].predict_indices(rows)
        stats.size = len(groups)
    else:
        for i, key in enumerate(keys):
            model = fit_on_matrix(Z, y, key, k, exclude_self)
            predictions[i] = model.predict_indices([i])[0]
        stats.misses = ds.n_rows
    correct = (predictions == y).astype(np.float64)
    return AxeResult(n, k, correct, predictions, stats)


def cache_bound(n_rows: int, n_features: int, n: int) -> int:
    return min(n_rows, comb(n_features, n))


def axe_auc(ds: Dataset, y_preds, explanations, k: int, exclude_self: bool = True,
            use_cache: bool = True) -> tuple[float, list[tuple[int, float]], np.ndarray]:
    """AXE averaged over n = 1..N; returns ``(auc, curve, per_point)``.

    ``per_point`` is each row's recovery rate averaged over n, so its mean is the AUC.
    """
    N = ds.n_features
    curve = []
    per_point = np.zeros(ds.n_rows)
    for n in range(1, N + 1):
        res = axe_score(ds, y_preds, explanations, n, k, exclude_self, use_cache)
        curve.append((n, res.score))
        per_point += res.correct
    per_point /= N
    auc = float(np.mean([v for _, v in curve]))
    return auc, curve, per_point


def evaluate_axe(m: Model, ds: Dataset, explanations, n: int | str, k: int,
                 exclude_self: bool = True) -> QualityReport:
    """AXE report for model ``m``; ``n`` may be an integer or ``"auc"``.

    The model is evaluated on the dataset rows only.
    """
    y_preds = np.asarray(m.predict_label(ds.features))
    meta = {"k": k, "leave_one_out": exclude_self, "aggregation": "mean over n=1..N"}
    if n == "auc":
        auc, curve, per_point = axe_auc(ds, y_preds, explanations, k, exclude_self)
        return QualityReport("axe", per_point, "auc", tuple(curve), meta)
    res = axe_score(ds, y_preds, explanations, int(n), k, exclude_self)
    meta = {"k": k, "leave_one_out": exclude_self, "cache": res.cache.as_dict()}
    return QualityReport("axe", res.correct, int(n), None, meta)
