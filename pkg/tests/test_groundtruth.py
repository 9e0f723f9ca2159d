import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy.stats import spearmanr

from axe_eval.core import BoundsError, ConfigError
from axe_eval.groundtruth import (
    GROUND_TRUTH_METRICS,
    feature_agreement,
    ground_truth_metric,
    ground_truth_per_point,
    pairwise_rank_agreement,
    rank_agreement,
    rank_correlation,
    sign_agreement,
    signed_rank_agreement,
)


def order(e):
    return [j for _, j in sorted((-abs(v), j) for j, v in enumerate(e))]


def sgn(v):
    return 1 if v >= 0 else -1


def oracle(metric, a, b, n=None):
    ta, tb = order(a)[:n] if n else None, order(b)[:n] if n else None
    if metric == "fa":
        return len(set(ta) & set(tb)) / n
    if metric == "ra":
        return sum(x == y for x, y in zip(ta, tb)) / n
    if metric == "sa":
        return sum(1 for j in set(ta) & set(tb) if sgn(a[j]) == sgn(b[j])) / n
    if metric == "sra":
        return sum(x == y and sgn(a[x]) == sgn(b[y]) for x, y in zip(ta, tb)) / n
    if metric == "rc":
        if len(set(np.abs(a))) == 1 or len(set(np.abs(b))) == 1:
            return 0.0
        return spearmanr(np.abs(a), np.abs(b)).statistic
    if metric == "pra":
        pa, pb = order(a), order(b)
        pairs = [(i, j) for i in range(len(a)) for j in range(i + 1, len(a))]
        same = sum((pa.index(i) < pa.index(j)) == (pb.index(i) < pb.index(j)) for i, j in pairs)
        return same / len(pairs)


def test_anchored_and_trivial_examples(rng):
    star = (0.7, 0.3)
    for _ in range(50):
        i2 = rng.uniform(0.01, 0.98)
        i1 = rng.uniform(i2 + 1e-3, 1.0)
        assert feature_agreement((i1, i2), star, 2) == 1.0
    assert feature_agreement((0.1, 0.9), (0.9, 0.1), 1) == 0.0
    assert rank_agreement((0.3, 0.7), star, 2) == 0.0
    assert rank_agreement((0.8, 0.2), star, 2) == 1.0
    assert sign_agreement((-0.5, 0.2), star, 2) == 0.5
    e = rng.normal(size=6)
    assert sign_agreement(e, e, 3) == 1.0
    assert signed_rank_agreement(e, e, 4) == 1.0
    assert signed_rank_agreement((0.3, 0.7), star, 2) == 0.0
    assert rank_correlation(e, e) == 1.0
    assert rank_correlation([1.0, 2.0, 3.0, 4.0], [4.0, 3.0, 2.0, 1.0]) == -1.0
    assert abs(rank_correlation((0.2, 0.9), star)) == 1.0
    assert pairwise_rank_agreement([3.0, 2.0, 1.0], [3.0, 2.0, 1.0]) == 1.0
    assert pairwise_rank_agreement([3.0, 2.0, 1.0], [2.0, 3.0, 1.0]) == pytest.approx(2 / 3)
    for _ in range(50):
        a, b = rng.normal(size=2), rng.normal(size=2)
        assert pairwise_rank_agreement(a, b) == feature_agreement(a, b, 1) == rank_agreement(a, b, 2)


def test_bounds_and_errors():
    with pytest.raises(BoundsError):
        feature_agreement((1.0, 2.0), (1.0, 2.0), 0)
    with pytest.raises(BoundsError):
        rank_agreement((1.0, 2.0), (1.0, 2.0), 3)
    with pytest.raises(ConfigError):
        feature_agreement((1.0, 2.0), (1.0, 2.0, 3.0), 1)
    with pytest.raises(ConfigError):
        ground_truth_metric("fa", (1.0, 2.0), (1.0, 2.0))
    with pytest.raises(ConfigError):
        ground_truth_metric("xyz", (1.0, 2.0), (1.0, 2.0), 1)
    with pytest.raises(BoundsError):
        pairwise_rank_agreement((1.0,), (2.0,))


def test_rank_correlation_undefined_returns_zero():
    assert rank_correlation([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == 0.0


values = st.sampled_from([-1.0, -0.5, 0.0, 0.25, 0.5, 1.0, 2.0])


@given(st.integers(2, 8).flatmap(lambda N: st.tuples(
    hnp.arrays(np.float64, N, elements=values), hnp.arrays(np.float64, N, elements=values))))
def test_metrics_match_definition_oracle(pair):
    a, b = pair
    for metric in ("fa", "ra", "sa", "sra"):
        for n in range(1, a.size + 1):
            assert ground_truth_metric(metric, a, b, n) == pytest.approx(oracle(metric, a, b, n), abs=1e-12)
    assert rank_correlation(a, b) == pytest.approx(oracle("rc", a, b), abs=1e-12)
    assert pairwise_rank_agreement(a, b) == pytest.approx(oracle("pra", a, b), abs=1e-12)


def test_symmetry_on_random_pairs(rng):
    for _ in range(1000):
        N = int(rng.integers(2, 9))
        a = rng.normal(size=N)
        b = rng.normal(size=N)
        if rng.random() < 0.3:
            a = np.round(a)  # include tied magnitudes and zeros
        for metric in GROUND_TRUTH_METRICS:
            if metric in ("rc", "pra"):
                assert ground_truth_metric(metric, a, b) == ground_truth_metric(metric, b, a)
            else:
                n = int(rng.integers(1, N + 1))
                assert ground_truth_metric(metric, a, b, n) == ground_truth_metric(metric, b, a, n)


def test_values_within_bounds(rng):
    for _ in range(200):
        a, b = rng.normal(size=5), rng.normal(size=5)
        for metric in ("fa", "ra", "sa", "sra", "pra"):
            v = ground_truth_metric(metric, a, b, 3 if metric != "pra" else None)
            assert 0.0 <= v <= 1.0
        assert -1.0 <= rank_correlation(a, b) <= 1.0


def test_zero_sign_counts_as_positive():
    assert sign_agreement((0.0, 1.0), (0.5, 1.0), 2) == 1.0
    assert sign_agreement((0.0, 1.0), (-0.5, 1.0), 2) == 0.5


def test_per_point_against_shared_ground_truth(rng):
    E = rng.normal(size=(10, 4))
    star = rng.normal(size=4)
    got = ground_truth_per_point("fa", E, star, 2)
    assert got.tolist() == [feature_agreement(e, star, 2) for e in E]
