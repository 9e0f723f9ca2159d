"""Ground-truth comparison metrics: FA, RA, SA, SRA, RC and PRA.

Rankings use ``|importance|`` with ties going to the lower feature index. The
sign of a zero importance counts as positive.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.stats import rankdata

from .core import BoundsError, ConfigError, feature_ranking, top_n_features

logger = logging.getLogger(__name__)

TOP_N_METRICS = ("fa", "ra", "sa", "sra")
FULL_METRICS = ("rc", "pra")
GROUND_TRUTH_METRICS = TOP_N_METRICS + FULL_METRICS


def _pair(e, e_star) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(e, dtype=np.float64)
    b = np.asarray(e_star, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigError("explanation and ground truth must be vectors of equal length")
    return a, b


def _sign(v: np.ndarray) -> np.ndarray:
    return np.where(v >= 0, 1, -1)


def feature_agreement(e, e_star, n: int) -> float:
    a, b = _pair(e, e_star)
    common = set(top_n_features(a, n).tolist()) & set(top_n_features(b, n).tolist())
    return len(common) / n


def rank_agreement(e, e_star, n: int) -> float:
    a, b = _pair(e, e_star)
    return float(np.sum(top_n_features(a, n) == top_n_features(b, n))) / n


def sign_agreement(e, e_star, n: int) -> float:
    a, b = _pair(e, e_star)
    common = set(top_n_features(a, n).tolist()) & set(top_n_features(b, n).tolist())
    sa, sb = _sign(a), _sign(b)
    return sum(1 for j in common if sa[j] == sb[j]) / n


def signed_rank_agreement(e, e_star, n: int) -> float:
    a, b = _pair(e, e_star)
    ta, tb = top_n_features(a, n), top_n_features(b, n)
    sa, sb = _sign(a), _sign(b)
    return float(np.sum((ta == tb) & (sa[ta] == sb[tb]))) / n


def rank_correlation(e, e_star) -> float:
    """Spearman correlation of ``|e|`` and ``|e*|`` with average ranks for ties.

    Undefined when either vector has all-equal magnitudes; returns 0.0 then.
    """
    a, b = _pair(e, e_star)
    if a.size < 3:
        logger.debug("rank correlation over %d features is degenerate (+-1 only)", a.size)
    ra, rb = rankdata(np.abs(a)), rankdata(np.abs(b))
    da, db = ra - ra.mean(), rb - rb.mean()
    denom = np.sqrt(np.sum(da * da) * np.sum(db * db))
    if denom == 0:
        return 0.0
    return float(np.clip(np.sum(da * db) / denom, -1.0, 1.0))


def pairwise_rank_agreement(e, e_star) -> float:
    """Fraction of feature pairs ordered the same way in both rankings."""
    a, b = _pair(e, e_star)
    N = a.size
    if N < 2:
        raise BoundsError("pairwise rank agreement needs at least two features")
    pos_a = np.empty(N, dtype=np.int64)
    pos_a[feature_ranking(a)] = np.arange(N)
    pos_b = np.empty(N, dtype=np.int64)
    pos_b[feature_ranking(b)] = np.arange(N)
    i, j = np.triu_indices(N, k=1)
    same = (pos_a[i] < pos_a[j]) == (pos_b[i] < pos_b[j])
    return float(np.mean(same))


_TOP_N = {
    "fa": feature_agreement,
    "ra": rank_agreement,
    "sa": sign_agreement,
    "sra": signed_rank_agreement,
}
_FULL = {"rc": rank_correlation, "pra": pairwise_rank_agreement}


def ground_truth_metric(metric_id: str, e, e_star, n: int | None = None) -> float:
    if metric_id in _TOP_N:
        if n is None:
            raise ConfigError(f"{metric_id} needs n")
        return _TOP_N[metric_id](e, e_star, n)
    if metric_id in _FULL:
        return _FULL[metric_id](e, e_star)
    raise ConfigError(f"unknown ground-truth metric {metric_id!r}")


def ground_truth_per_point(metric_id: str, E: np.ndarray, e_star, n: int | None = None) -> np.ndarray:
    """Metric value for every row of the explanation matrix ``E`` against one ``e*``."""
    return np.array([ground_truth_metric(metric_id, row, e_star, n) for row in np.asarray(E)])
