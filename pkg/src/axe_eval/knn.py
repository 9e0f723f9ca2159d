"""Exact brute-force k-nearest-neighbour voting over feature subsets.

Neighbours are ranked by squared Euclidean distance (same order as Euclidean)
with ties going to the lower training-row index. A query votes 1 when the mean
of its ``k`` neighbour targets is at least 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numba
import numpy as np
from scipy.spatial import cKDTree

from .core import BoundsError, ConfigError, Dataset, standardize

# point queries above this many query-row pairs go through a KD-tree prefilter
TREE_MIN_WORK = 2_000_000
TREE_EXTRA = 8


@numba.njit(cache=True, nogil=True)
def _heap_sift_down(dist, idx, size, pos):
    # max-heap ordered by (dist, idx)
    while True:
        left = 2 * pos + 1
        if left >= size:
            return
        child = left
        right = left + 1
        if right < size and (
            dist[right] > dist[left] or (dist[right] == dist[left] and idx[right] > idx[left])
        ):
            child = right
        if dist[child] > dist[pos] or (dist[child] == dist[pos] and idx[child] > idx[pos]):
            dist[child], dist[pos] = dist[pos], dist[child]
            idx[child], idx[pos] = idx[pos], idx[child]
            pos = child
        else:
            return


@numba.njit(cache=True, nogil=True)
def _heap_sift_up(dist, idx, pos):
    while pos > 0:
        parent = (pos - 1) // 2
        if dist[pos] > dist[parent] or (dist[pos] == dist[parent] and idx[pos] > idx[parent]):
            dist[pos], dist[parent] = dist[parent], dist[pos]
            idx[pos], idx[parent] = idx[parent], idx[pos]
            pos = parent
        else:
            return


@numba.njit(cache=True, nogil=True)
def _neighbour_positive_counts(train, targets, queries, exclude, k):
    """Number of positive targets among the k nearest training rows of each query.

    ``exclude[q]`` is a training row skipped for query ``q`` (-1 for none).
    Rows are scanned in ascending index order, so an equal-distance candidate
    never displaces a heap member: ties resolve to the lower index.
    """
    n_train, dim = train.shape
    n_query = queries.shape[0]
    out = np.empty(n_query, dtype=np.int64)
    hd = np.empty(k, dtype=np.float64)
    hi = np.empty(k, dtype=np.int64)
    for q in range(n_query):
        size = 0
        skip = exclude[q]
        for j in range(n_train):
            if j == skip:
                continue
            d = 0.0
            for c in range(dim):
                diff = train[j, c] - queries[q, c]
                d += diff * diff
            if size < k:
                hd[size] = d
                hi[size] = j
                _heap_sift_up(hd, hi, size)
                size += 1
            elif d < hd[0]:
                hd[0] = d
                hi[0] = j
                _heap_sift_down(hd, hi, size, 0)
        count = 0
        for s in range(size):
            count += targets[hi[s]]
        out[q] = count
    return out


@numba.njit(cache=True, nogil=True)
def _candidate_positive_counts(train, targets, queries, cand, k):
    """Exact voting restricted to per-query candidate rows ``cand[q]``.

    Distances are accumulated exactly as in the brute-force kernel. ``safe[q]``
    is False when the k-th distance is not clearly below the farthest
    candidate, i.e. when rows outside the candidate set could still tie.
    """
    n_query, m = cand.shape
    dim = train.shape[1]
    out = np.empty(n_query, dtype=np.int64)
    safe = np.empty(n_query, dtype=np.bool_)
    d = np.empty(m, dtype=np.float64)
    for q in range(n_query):
        for s in range(m):
            j = cand[q, s]
            acc = 0.0
            for c in range(dim):
                diff = train[j, c] - queries[q, c]
                acc += diff * diff
            d[s] = acc
        picked = np.zeros(m, dtype=np.bool_)
        count = 0
        kth = 0.0
        for _ in range(k):
            best = -1
            for s in range(m):
                if picked[s]:
                    continue
                if best < 0 or d[s] < d[best] or (d[s] == d[best] and cand[q, s] < cand[q, best]):
                    best = s
            picked[best] = True
            count += targets[cand[q, best]]
            kth = d[best]
        far = d.max()
        safe[q] = kth < far * (1.0 - 1e-9) - 1e-300
        out[q] = count
    return out, safe


@numba.njit(cache=True, nogil=True)
def _sorted_positive_counts(values, order, targets, qvals, qstart, skip, k):
    """One-dimensional fast path over ``values`` sorted ascending (stable in row index).

    For each query the window grows outward one distance level at a time: every
    candidate at the current smallest distance is gathered from both sides, and
    when a level holds more candidates than still needed the lowest row indices
    win. Produces exactly the neighbour set of the brute-force kernel.
    """
    n = values.shape[0]
    nq = qvals.shape[0]
    out = np.empty(nq, dtype=np.int64)
    tied = np.empty(n, dtype=np.int64)
    for q in range(nq):
        v = qvals[q]
        s = skip[q]
        left = qstart[q] - 1
        right = qstart[q]
        need = k
        pos = 0
        while need > 0:
            if left == s:
                left -= 1
            if right == s:
                right += 1
            d_left = np.inf
            d_right = np.inf
            if left >= 0:
                diff = values[left] - v
                d_left = diff * diff
            if right < n:
                diff = values[right] - v
                d_right = diff * diff
            t = min(d_left, d_right)
            if t == np.inf:
                break
            m = 0
            while left >= 0:
                if left != s:
                    diff = values[left] - v
                    if diff * diff != t:
                        break
                    tied[m] = order[left]
                    m += 1
                left -= 1
            while right < n:
                if right != s:
                    diff = values[right] - v
                    if diff * diff != t:
                        break
                    tied[m] = order[right]
                    m += 1
                right += 1
            if m <= need:
                for i in range(m):
                    pos += targets[tied[i]]
                need -= m
            else:
                chosen = np.sort(tied[:m])
                for i in range(need):
                    pos += targets[chosen[i]]
                need = 0
        out[q] = pos
    return out


@dataclass(frozen=True, eq=False)
class KnnModel:
    """k-NN voter restricted to an ordered feature subset.

    ``targets`` are the evaluated model's predictions, not data labels.
    Single-column subsets carry a sorted index for the fast path.
    """

    subset: tuple[int, ...]
    train_matrix: np.ndarray
    targets: np.ndarray
    k: int
    exclude_self: bool = True
    sorted_values: np.ndarray | None = None
    order: np.ndarray | None = None
    rank: np.ndarray | None = None

    @property
    def n_train(self) -> int:
        return self.train_matrix.shape[0]

    def positive_counts(self, query_indices) -> np.ndarray:
        """Positive-neighbour counts for training rows used as queries."""
        q = np.asarray(query_indices, dtype=np.int64).reshape(-1)
        if q.size and (q.min() < 0 or q.max() >= self.n_train):
            raise BoundsError("query index outside the training rows")
        if self.sorted_values is not None:
            qvals = self.sorted_values[self.rank[q]]
            start = np.searchsorted(self.sorted_values, qvals, side="left").astype(np.int64)
            skip = self.rank[q] if self.exclude_self else np.full(q.shape, -1, dtype=np.int64)
            return _sorted_positive_counts(
                self.sorted_values, self.order, self.targets, qvals, start, skip, self.k
            )
        exclude = q if self.exclude_self else np.full(q.shape, -1, dtype=np.int64)
        return _neighbour_positive_counts(
            self.train_matrix, self.targets, np.ascontiguousarray(self.train_matrix[q]), exclude, self.k
        )

    def predict_indices(self, query_indices) -> np.ndarray:
        counts = self.positive_counts(query_indices)
        # mean >= 0.5  <=>  2 * count >= k, exact in integers
        return (2 * counts >= self.k).astype(np.int8)

    def predict_points(self, points) -> np.ndarray:
        """Votes for arbitrary points in subset coordinates; nothing is excluded."""
        P = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=np.float64)))
        if P.shape[1] != self.train_matrix.shape[1]:
            raise ConfigError(f"points have {P.shape[1]} columns, model uses {self.train_matrix.shape[1]}")
        if self.k > self.n_train:
            raise ConfigError(f"k={self.k} exceeds {self.n_train} training rows")
        none = np.full(P.shape[0], -1, dtype=np.int64)
        if self.sorted_values is not None:
            qvals = np.ascontiguousarray(P[:, 0])
            start = np.searchsorted(self.sorted_values, qvals, side="left").astype(np.int64)
            counts = _sorted_positive_counts(
                self.sorted_values, self.order, self.targets, qvals, start, none, self.k
            )
        elif P.shape[0] * self.n_train >= TREE_MIN_WORK and self.n_train > self.k + TREE_EXTRA:
            counts = self._tree_counts(P)
        else:
            counts = _neighbour_positive_counts(self.train_matrix, self.targets, P, none, self.k)
        return (2 * counts >= self.k).astype(np.int8)

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.train_matrix)

    def _tree_counts(self, P: np.ndarray) -> np.ndarray:
        # KD-tree proposes candidates; the exact kernel decides, brute force covers wide ties
        _, cand = self._tree.query(P, k=self.k + TREE_EXTRA, workers=-1)
        counts, safe = _candidate_positive_counts(
            self.train_matrix, self.targets, P, np.ascontiguousarray(cand, dtype=np.int64), self.k
        )
        if not safe.all():
            bad = np.flatnonzero(~safe)
            none = np.full(bad.size, -1, dtype=np.int64)
            counts[bad] = _neighbour_positive_counts(
                self.train_matrix, self.targets, np.ascontiguousarray(P[bad]), none, self.k
            )
        return counts


def _check_targets(targets, n_rows: int) -> np.ndarray:
    t = np.asarray(targets)
    if t.shape != (n_rows,):
        raise ConfigError(f"targets must have length {n_rows}")
    if not np.all((t == 0) | (t == 1)):
        raise ConfigError("targets must be 0/1")
    return np.ascontiguousarray(t, dtype=np.int64)


def fit_on_matrix(X: np.ndarray, targets, subset: Sequence[int], k: int, exclude_self: bool = True) -> KnnModel:
    """Fit on an explicit matrix (already in the distance space)."""
    X = np.asarray(X, dtype=np.float64)
    subset = tuple(int(j) for j in subset)
    if not subset:
        raise ConfigError("feature subset must be non-empty")
    if len(set(subset)) != len(subset) or min(subset) < 0 or max(subset) >= X.shape[1]:
        raise BoundsError(f"invalid feature subset {subset} for {X.shape[1]} features")
    if k < 1:
        raise ConfigError("k must be >= 1")
    available = X.shape[0] - 1 if exclude_self else X.shape[0]
    if k > available:
        raise ConfigError(
            f"k={k} exceeds the {available} neighbours available"
            + (" under leave-one-out querying" if exclude_self else "")
        )
    t = _check_targets(targets, X.shape[0])
    train = np.ascontiguousarray(X[:, list(subset)])
    train.setflags(write=False)
    t.setflags(write=False)
    sorted_values = order = rank = None
    if len(subset) == 1:
        order = np.argsort(train[:, 0], kind="stable").astype(np.int64)
        sorted_values = np.ascontiguousarray(train[order, 0])
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
    return KnnModel(subset, train, t, int(k), bool(exclude_self), sorted_values, order, rank)


def knn_fit(ds: Dataset, targets, subset: Sequence[int], k: int, exclude_self: bool = True) -> KnnModel:
    """Fit a k-NN voter on the standardized ``subset`` columns of ``ds``."""
    return fit_on_matrix(standardize(ds).features, targets, subset, k, exclude_self)


def knn_predict(model: KnnModel, query_index: int) -> int:
    """Vote for one dataset row, excluding the row itself when the model is leave-one-out."""
    return int(model.predict_indices([query_index])[0])
