"""Perturbation metrics PGI / PGU and an on-manifold probability estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import gaussian_kde

from .core import ConfigError, DataError, Dataset, bottom_n_features, substream, top_n_features
from .models import Model

MIN_DENSITY_ROWS = 50


@dataclass(frozen=True)
class PerturbationPlan:
    target: str = "important"
    n: int = 1
    width: float = 0.5
    samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.target not in ("important", "unimportant"):
            raise ConfigError("target must be 'important' or 'unimportant'")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not self.width > 0:
            raise ConfigError("width must be positive")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")


def prediction_gap(m: Model, x, features, width: float, samples: int, rng) -> np.ndarray:
    """``|score(x) - score(x~)|`` per sample, where only ``features`` get N(0, width^2) noise.

    Noise columns follow ascending feature index, so the draw depends only on
    the feature set and not on its order.
    """
    x = np.asarray(x, dtype=np.float64)
    features = np.sort(np.asarray(features, dtype=np.int64))
    pert = np.repeat(x[None, :], samples, axis=0)
    pert[:, features] += rng.normal(scale=width, size=(samples, features.size))
    return np.abs(m.predict_score(x) - m.predict_score(pert))


def _gap(m, x, e, plan: PerturbationPlan, index: int) -> float:
    pick = top_n_features if plan.target == "important" else bottom_n_features
    features = pick(e, plan.n)
    return float(np.mean(prediction_gap(m, x, features, plan.width, plan.samples, substream(plan.seed, index))))


def pgi(m: Model, x, e, plan: PerturbationPlan, index: int = 0) -> float:
    """Mean output change when the top-n features of ``e`` are perturbed (higher is better)."""
    if plan.target != "important":
        raise ConfigError("pgi needs an 'important' perturbation plan")
    return _gap(m, x, e, plan, index)


def pgu(m: Model, x, e, plan: PerturbationPlan, index: int = 0) -> float:
    """Mean output change when the n least important features are perturbed (lower is better)."""
    if plan.target != "unimportant":
        raise ConfigError("pgu needs an 'unimportant' perturbation plan")
    return _gap(m, x, e, plan, index)


def sensitivity_per_point(metric_id: str, m: Model, X: np.ndarray, E: np.ndarray, n: int,
                          width: float, samples: int, seed: int, indices=None,
                          batch_rows: int = 200_000) -> np.ndarray:
    """PGI or PGU for each row; row ``i`` uses the substream ``(seed, indices[i])``.

    Perturbations of many rows are stacked so the model is called once per
    batch; results match calling :func:`pgi` / :func:`pgu` row by row.
    """
    target = {"pgi": "important", "pgu": "unimportant"}.get(metric_id)
    if target is None:
        raise ConfigError(f"unknown sensitivity metric {metric_id!r}")
    plan = PerturbationPlan(target, n, width, samples, seed)
    X = np.asarray(X, dtype=np.float64)
    E = np.asarray(E, dtype=np.float64)
    if X.shape != E.shape:
        raise ConfigError(f"explanations {E.shape} do not match data {X.shape}")
    indices = np.arange(X.shape[0]) if indices is None else np.asarray(indices, dtype=np.int64)
    pick = top_n_features if target == "important" else bottom_n_features
    feats = np.sort(pick(E, n), axis=1)
    base = m.predict_score(X)
    out = np.empty(X.shape[0])
    per_batch = max(1, batch_rows // samples)
    for start in range(0, X.shape[0], per_batch):
        stop = min(start + per_batch, X.shape[0])
        pert = np.repeat(X[start:stop], samples, axis=0)
        for r in range(start, stop):
            noise = substream(seed, int(indices[r])).normal(scale=width, size=(samples, n))
            rows = slice((r - start) * samples, (r - start + 1) * samples)
            pert[rows, feats[r]] += noise
        gaps = np.abs(base[start:stop, None] - m.predict_score(pert).reshape(stop - start, samples))
        out[start:stop] = gaps.mean(axis=1)
    return out


class DensityModel:
    """Density used to decide whether points lie on the data manifold.

    With cluster labels: one Gaussian component per cluster, fitted by sample
    mean/covariance and weighted by cluster share. Without: Gaussian KDE with
    Scott's-rule bandwidth. ``threshold`` is the 1st percentile of the density
    over the real rows, so 99% of the data counts as on-manifold.
    """

    def __init__(self, X: np.ndarray, clusters=None, max_reference: int = 2000, seed: int = 0):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] < MIN_DENSITY_ROWS:
            raise DataError(f"need at least {MIN_DENSITY_ROWS} rows to estimate density, got {X.shape[0]}")
        self.components = None
        self.kde = None
        if clusters is not None:
            clusters = np.asarray(clusters)
            self.components = []
            for c in np.unique(clusters):
                pts = X[clusters == c]
                self.components.append((pts.shape[0] / X.shape[0], pts.mean(axis=0), np.atleast_2d(np.cov(pts.T))))
        else:
            self.kde = gaussian_kde(X.T, bw_method="scott")
        ref = X
        if X.shape[0] > max_reference:
            ref = X[substream(seed, 0).choice(X.shape[0], size=max_reference, replace=False)]
        self.threshold = float(np.quantile(self.density(ref), 0.01))

    def density(self, P) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=np.float64))
        if self.kde is not None:
            return self.kde(P.T)
        out = np.zeros(P.shape[0])
        d = P.shape[1]
        for w, mu, cov in self.components:
            diff = P - mu
            inv = np.linalg.inv(cov)
            quad = np.einsum("ij,jk,ik->i", diff, inv, diff)
            norm = np.sqrt((2 * np.pi) ** d * np.linalg.det(cov))
            out += w * np.exp(-0.5 * quad) / norm
        return out

    def on_manifold(self, P) -> np.ndarray:
        return self.density(P) >= self.threshold


def on_manifold_probability(ds: Dataset | np.ndarray, x, subset, width: float, samples: int,
                            seed: int = 0, clusters=None, density: DensityModel | None = None) -> float:
    """Fraction of perturbations of ``x`` (noise on ``subset`` only) that land on-manifold."""
    X = ds.features if isinstance(ds, Dataset) else np.asarray(ds, dtype=np.float64)
    if not width > 0:
        raise ConfigError("width must be positive")
    if density is None:
        density = DensityModel(X, clusters, seed=seed)
    x = np.asarray(x, dtype=np.float64)
    subset = np.asarray(list(subset), dtype=np.int64)
    rng = substream(seed, 1)
    pert = np.repeat(x[None, :], samples, axis=0)
    pert[:, subset] += rng.normal(scale=width, size=(samples, subset.size))
    return float(np.mean(density.on_manifold(pert)))
