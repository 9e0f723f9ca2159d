"""Post-hoc local feature-importance explainers.

All explainers work in the coordinates the model consumes (standardized
features in the pipelines) and return a signed vector of length N.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass
from math import comb

import numpy as np

from .core import ConfigError, Dataset, Explanation, substream
from .models import Model, model_gradient
from .parallel import parallel_map

logger = logging.getLogger(__name__)

EXPLAINERS = ("grad", "input_x_grad", "smoothgrad", "integrated_gradients", "lime", "kernelshap", "random")
GRADIENT_EXPLAINERS = ("grad", "input_x_grad", "smoothgrad", "integrated_gradients")


@dataclass(frozen=True)
class ExplainerConfig:
    explainer_id: str = "lime"
    sample_count: int = 1000
    noise_width: float = 0.5
    ig_steps: int = 50
    baseline: str = "dataset-mean"
    seed: int = 0
    lime_kernel: bool = True

    def __post_init__(self):
        if self.explainer_id not in EXPLAINERS:
            raise ConfigError(f"unknown explainer {self.explainer_id!r}; choose from {EXPLAINERS}")
        if self.sample_count < 1 or self.ig_steps < 1:
            raise ConfigError("sample_count and ig_steps must be positive")
        if not self.noise_width > 0:
            raise ConfigError("noise_width must be positive")
        if self.baseline not in ("zeros", "dataset-mean"):
            raise ConfigError("baseline must be 'zeros' or 'dataset-mean'")

    def to_dict(self) -> dict:
        return asdict(self)


def explain_grad(m: Model, x) -> np.ndarray:
    return np.asarray(model_gradient(m, np.asarray(x, dtype=np.float64)), dtype=np.float64)


def explain_input_x_grad(m: Model, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x * explain_grad(m, x)


def explain_smoothgrad(m: Model, x, cfg: ExplainerConfig, rng=None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    rng = rng if rng is not None else substream(cfg.seed)
    noisy = x + rng.normal(scale=cfg.noise_width, size=(cfg.sample_count, x.size))
    return model_gradient(m, noisy).mean(axis=0)


def _baseline(x: np.ndarray, cfg: ExplainerConfig, ds: Dataset | None) -> np.ndarray:
    if cfg.baseline == "zeros" or ds is None:
        return np.zeros_like(x)
    return ds.features.mean(axis=0)


def explain_integrated_gradients(m: Model, x, cfg: ExplainerConfig, ds: Dataset | None = None,
                                 baseline=None) -> np.ndarray:
    """Midpoint-rule path integral of the gradient from the baseline to ``x``."""
    x = np.asarray(x, dtype=np.float64)
    b = _baseline(x, cfg, ds) if baseline is None else np.asarray(baseline, dtype=np.float64)
    alphas = (np.arange(cfg.ig_steps) + 0.5) / cfg.ig_steps
    path = b[None, :] + alphas[:, None] * (x - b)[None, :]
    return (x - b) * model_gradient(m, path).mean(axis=0)


def weighted_linear_fit(deltas: np.ndarray, targets: np.ndarray, weights: np.ndarray,
                        ridge: float = 1e-6) -> np.ndarray:
    """Solve ``min_I sum_s w_s (targets_s - I . deltas_s)^2`` (no intercept)."""
    sw = np.sqrt(weights)
    A = deltas * sw[:, None]
    b = targets * sw
    gram = A.T @ A
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        logger.info("singular LIME design; ridge fallback %g", ridge)
        return np.linalg.solve(gram + ridge * np.eye(gram.shape[0]), A.T @ b)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return coef


def lime_samples(x: np.ndarray, cfg: ExplainerConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    deltas = rng.normal(scale=cfg.noise_width, size=(cfg.sample_count, x.size))
    if cfg.lime_kernel:
        weights = np.exp(-np.sum(deltas * deltas, axis=1) / (2 * cfg.noise_width ** 2))
    else:
        weights = np.ones(cfg.sample_count)
    return deltas, weights


def fidelity_loss(m: Model, x, importances, deltas, weights) -> float:
    """Weighted squared fidelity of ``score(x) + I . delta`` to ``score(x + delta)``."""
    x = np.asarray(x, dtype=np.float64)
    resid = m.predict_score(x + deltas) - m.predict_score(x) - deltas @ np.asarray(importances)
    return float(np.sum(weights * resid * resid))


def explain_lime(m: Model, x, ds: Dataset | None, cfg: ExplainerConfig, rng=None) -> np.ndarray:
    """Weighted least squares of score changes on Gaussian offsets around ``x``.

    The fit is anchored at ``score(x)`` (no free intercept), so it is the exact
    minimizer of :func:`fidelity_loss` over its own sample set.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = rng if rng is not None else substream(cfg.seed)
    deltas, weights = lime_samples(x, cfg, rng)
    targets = m.predict_score(x + deltas) - m.predict_score(x)
    return weighted_linear_fit(deltas, targets, weights)


def shapley_kernel_weight(N: int, size: int) -> float:
    return (N - 1) / (comb(N, size) * size * (N - size))


def _coalitions(N: int, cfg: ExplainerConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """Proper coalitions and their regression weights.

    Enumerates all ``2^N - 2`` when they fit in ``sample_count``; otherwise
    samples sizes in proportion to total kernel mass and weights each draw 1.
    """
    total = 2 ** N - 2
    if total <= cfg.sample_count:
        Z = np.array([z for z in itertools.product((0, 1), repeat=N) if 0 < sum(z) < N], dtype=np.float64)
        w = np.array([shapley_kernel_weight(N, int(z.sum())) for z in Z])
        return Z, w
    sizes = np.arange(1, N)
    mass = np.array([shapley_kernel_weight(N, s) * comb(N, s) for s in sizes])
    drawn = rng.choice(sizes, size=cfg.sample_count, p=mass / mass.sum())
    Z = np.zeros((cfg.sample_count, N))
    for r, s in enumerate(drawn):
        Z[r, rng.choice(N, size=s, replace=False)] = 1.0
    return Z, np.ones(cfg.sample_count)


def explain_kernelshap(m: Model, x, ds: Dataset | None, cfg: ExplainerConfig, rng=None,
                       background=None) -> np.ndarray:
    """Kernel SHAP against a single background point (the dataset mean by default).

    Solves the Shapley-kernel weighted regression subject to
    ``sum(e) = score(x) - score(background)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if background is None:
        background = ds.features.mean(axis=0) if ds is not None else np.zeros_like(x)
    background = np.asarray(background, dtype=np.float64)
    N = x.size
    fx = float(m.predict_score(x))
    f0 = float(m.predict_score(background))
    total = fx - f0
    if N == 1:
        return np.array([total])
    rng = rng if rng is not None else substream(cfg.seed)
    Z, w = _coalitions(N, cfg, rng)
    hybrids = np.where(Z > 0, x[None, :], background[None, :])
    v = m.predict_score(hybrids) - f0
    # eliminate the last coordinate via the efficiency constraint
    A = Z[:, :-1] - Z[:, [-1]]
    b = v - Z[:, -1] * total
    head = weighted_linear_fit(A, b, w)
    return np.append(head, total - head.sum())


def explain_random(x, cfg: ExplainerConfig, rng=None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    rng = rng if rng is not None else substream(cfg.seed)
    return rng.uniform(-1.0, 1.0, size=x.size)


def explain(m: Model, ds: Dataset, index: int, cfg: ExplainerConfig) -> Explanation:
    """Explain row ``index`` of ``ds`` using the substream derived from ``(cfg.seed, index)``."""
    x = ds.features[index]
    rng = substream(cfg.seed, index)
    eid = cfg.explainer_id
    if eid == "grad":
        e = explain_grad(m, x)
    elif eid == "input_x_grad":
        e = explain_input_x_grad(m, x)
    elif eid == "smoothgrad":
        e = explain_smoothgrad(m, x, cfg, rng)
    elif eid == "integrated_gradients":
        e = explain_integrated_gradients(m, x, cfg, ds)
    elif eid == "lime":
        e = explain_lime(m, x, ds, cfg, rng)
    elif eid == "kernelshap":
        e = explain_kernelshap(m, x, ds, cfg, rng)
    else:
        e = explain_random(x, cfg, rng)
    return Explanation(e, int(index), eid)


def explain_dataset(m: Model, ds: Dataset, cfg: ExplainerConfig, indices=None, jobs: int = 1) -> np.ndarray:
    """Explanation matrix with one row per requested datapoint (all rows by default)."""
    if indices is None:
        indices = range(ds.n_rows)
    rows = parallel_map(lambda i: explain(m, ds, i, cfg).importances, list(indices), jobs)
    return np.vstack(rows) if rows else np.zeros((0, ds.n_features))
