import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axe_eval.core import BoundsError, ConfigError, standardize
from axe_eval.knn import TREE_EXTRA, fit_on_matrix, knn_fit, knn_predict

from conftest import make_dataset


def brute_votes(X, targets, subset, queries, k, exclude=None):
    """All-pairs oracle: neighbours ordered by (squared distance, row index)."""
    A = X[:, subset]
    out = []
    for q, point in enumerate(queries):
        d = ((A - point[subset]) ** 2).sum(axis=1)
        idx = np.arange(len(A))
        if exclude is not None:
            keep = idx != exclude[q]
            d, idx = d[keep], idx[keep]
        order = np.lexsort((idx, d))[:k]
        out.append(int(2 * targets[idx[order]].sum() >= k))
    return np.array(out)


def random_instance(rng, trial):
    nu = int(rng.integers(5, 501))
    N = int(rng.integers(1, 7))
    if trial % 3 == 0:
        X = rng.integers(-2, 3, size=(nu, N)).astype(float)  # lattice: many exact ties
    elif trial % 3 == 1:
        X = rng.normal(size=(nu, N))
        X[nu // 2:] = X[: nu - nu // 2]  # duplicated rows
    else:
        X = rng.normal(size=(nu, N))
    targets = rng.integers(0, 2, size=nu)
    size = int(rng.integers(1, N + 1))
    subset = sorted(rng.choice(N, size=size, replace=False).tolist())
    k = int(rng.integers(1, min(nu - 1, 25) + 1))
    return X, targets, subset, k


def test_leave_one_out_matches_brute_force_oracle():
    rng = np.random.default_rng(2024)
    for trial in range(100):
        X, t, subset, k = random_instance(rng, trial)
        m = fit_on_matrix(X, t, subset, k, exclude_self=True)
        rows = np.arange(X.shape[0])
        expected = brute_votes(X, t, subset, X, k, exclude=rows)
        np.testing.assert_array_equal(m.predict_indices(rows), expected, err_msg=f"trial {trial}")


def test_point_queries_match_brute_force_oracle():
    rng = np.random.default_rng(99)
    for trial in range(100):
        X, t, subset, k = random_instance(rng, trial)
        m = fit_on_matrix(X, t, subset, k, exclude_self=False)
        Q = np.vstack([X[:40], X[:40] + rng.normal(scale=0.3, size=X[:40].shape)])
        np.testing.assert_array_equal(m.predict_points(Q[:, subset]), brute_votes(X, t, subset, Q, k))


def test_tree_path_matches_brute_force_oracle():
    rng = np.random.default_rng(5)
    for trial in range(20):
        X, t, subset, k = random_instance(rng, trial)
        if len(subset) < 2 or X.shape[0] <= k + TREE_EXTRA:
            continue
        m = fit_on_matrix(X, t, subset, k, exclude_self=False)
        Q = np.vstack([X[:50], X[:50] + rng.normal(scale=0.5, size=X[:50].shape)])
        counts = m._tree_counts(np.ascontiguousarray(Q[:, subset]))
        np.testing.assert_array_equal((2 * counts >= k).astype(int), brute_votes(X, t, subset, Q, k))


def test_structural_examples():
    X = np.arange(8, dtype=float).reshape(4, 2)
    m = fit_on_matrix(X, [0, 1, 0, 1], [0], 1)
    assert m.train_matrix.shape == (4, 1)
    with pytest.raises(ConfigError):
        fit_on_matrix(X, [0, 1, 0, 1], [], 1)
    with pytest.raises(ConfigError):
        fit_on_matrix(X, [0, 1, 0, 1], [0], 4, exclude_self=True)
    fit_on_matrix(X, [0, 1, 0, 1], [0], 4, exclude_self=False)
    with pytest.raises(BoundsError):
        fit_on_matrix(X, [0, 1, 0, 1], [2], 1)
    with pytest.raises(BoundsError):
        fit_on_matrix(X, [0, 1, 0, 1], [0, 0], 1)
    with pytest.raises(ConfigError):
        fit_on_matrix(X, [0, 1, 0, 2], [0], 1)


def test_majority_with_equidistant_neighbours():
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    m = fit_on_matrix(X, [1, 1, 0], [0, 1], 3, exclude_self=False)
    assert m.predict_points([[0.0, 0.0]]).tolist() == [1]


def test_half_vote_predicts_one():
    X = np.array([[0.0], [1.0], [10.0], [11.0]])
    m = fit_on_matrix(X, [1, 0, 0, 0], [0], 2, exclude_self=False)
    assert m.predict_points([[0.5]]).tolist() == [1]


def test_tie_goes_to_lower_index():
    # rows 1 and 2 are equidistant from row 0; k=1 must pick row 1
    X = np.array([[0.0], [1.0], [-1.0]])
    assert fit_on_matrix(X, [0, 1, 0], [0], 1).predict_indices([0]).tolist() == [1]
    assert fit_on_matrix(X, [0, 0, 1], [0], 1).predict_indices([0]).tolist() == [0]


def test_four_gaussian_query_at_cluster_center(small_gaussians):
    ds, _ = small_gaussians
    y = (ds.features[:, 0] > 0).astype(int)
    Z = standardize(ds)
    m = knn_fit(ds, y, [0], 5, exclude_self=False)
    q = (np.array([2.0, 2.0]) - Z.mean) / Z.std
    assert m.predict_points([q[[0]]]).tolist() == [1]
    big = knn_fit(ds, y, [1], 400, exclude_self=False)
    counts = big.positive_counts(np.arange(ds.n_rows))
    assert abs(counts.mean() / 400 - 0.5) < 0.1


def test_knn_predict_single_row():
    X = np.array([[0.0], [0.1], [5.0], [5.1]])
    ds = make_dataset(X)
    m = knn_fit(ds, [0, 0, 1, 1], [0], 1)
    assert [knn_predict(m, i) for i in range(4)] == [0, 0, 1, 1]


def test_permutation_invariance_with_distinct_distances(rng):
    X = rng.normal(size=(120, 3))
    t = rng.integers(0, 2, size=120)
    perm = rng.permutation(120)
    a = fit_on_matrix(X, t, [0, 2], 7).predict_indices(np.arange(120))
    b = fit_on_matrix(X[perm], t[perm], [0, 2], 7).predict_indices(np.arange(120))
    np.testing.assert_array_equal(a[perm], b)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_subset_equals_zeroed_full_distance(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 4))
    t = rng.integers(0, 2, size=60)
    subset = [0, 3]
    zeroed = X.copy()
    zeroed[:, [1, 2]] = 0.0
    a = fit_on_matrix(X, t, subset, 5).predict_indices(np.arange(60))
    b = fit_on_matrix(zeroed, t, [0, 1, 2, 3], 5).predict_indices(np.arange(60))
    np.testing.assert_array_equal(a, b)


def test_point_dimension_checked():
    m = fit_on_matrix(np.zeros((5, 2)), [0, 1, 0, 1, 0], [0, 1], 1, exclude_self=False)
    with pytest.raises(ConfigError):
        m.predict_points([[0.0]])
