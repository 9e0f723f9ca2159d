"""Binary classifiers with analytic input gradients, and the scaffolded adversarial model."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .core import (
    LABEL_THRESHOLD,
    CapabilityError,
    ConfigError,
    Dataset,
    DataError,
    FitError,
    substream,
)
from .knn import KnnModel, fit_on_matrix

logger = logging.getLogger(__name__)

L2_STRENGTH = 1e-4


def _as_2d(X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    return (X[None, :], True) if X.ndim == 1 else (X, False)


class Model:
    """Binary classifier contract: a score in [0, 1] and a label thresholded at 0.5.

    Inputs may be a single vector or a ``rows x features`` matrix.
    """

    has_gradient = False

    def _score(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _gradient(self, X: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} has no analytic gradient")

    def predict_score(self, X):
        X2, single = _as_2d(X)
        s = self._score(X2)
        return s[0] if single else s

    def predict_label(self, X):
        s = self.predict_score(X)
        return (np.asarray(s) >= LABEL_THRESHOLD).astype(np.int8)

    def gradient(self, X):
        X2, single = _as_2d(X)
        g = self._gradient(X2)
        return g[0] if single else g


def model_gradient(m: Model, x) -> np.ndarray:
    """Gradient of ``m.predict_score`` at ``x``; raises CapabilityError if unavailable."""
    if not m.has_gradient:
        raise CapabilityError(f"{type(m).__name__} has no analytic gradient")
    return m.gradient(x)


class CallableModel(Model):
    """Wrap plain functions on row matrices as a model."""

    def __init__(self, score_fn: Callable[[np.ndarray], np.ndarray],
                 gradient_fn: Callable[[np.ndarray], np.ndarray] | None = None):
        self.score_fn = score_fn
        self.gradient_fn = gradient_fn
        self.has_gradient = gradient_fn is not None

    def _score(self, X):
        return np.asarray(self.score_fn(X), dtype=np.float64).reshape(X.shape[0])

    def _gradient(self, X):
        if self.gradient_fn is None:
            return super()._gradient(X)
        return np.asarray(self.gradient_fn(X), dtype=np.float64).reshape(X.shape)


class ConstantModel(Model):
    has_gradient = True

    def __init__(self, value: float = 0.5):
        self.value = float(value)

    def _score(self, X):
        return np.full(X.shape[0], self.value)

    def _gradient(self, X):
        return np.zeros_like(X)


@dataclass(eq=False)
class ThresholdModel(Model):
    """Hard rule ``1[x[feature] > threshold]`` (or ``>=`` when ``inclusive``)."""

    feature: int
    threshold: float = 0.0
    inclusive: bool = False

    def _score(self, X):
        col = X[:, self.feature]
        hit = col >= self.threshold if self.inclusive else col > self.threshold
        return hit.astype(np.float64)


@dataclass(eq=False)
class SumThresholdModel(Model):
    """``1[sum_j (x_j - c_j) / s_j > 0]`` over a few features."""

    features: tuple[int, ...]
    centers: tuple[float, ...]
    scales: tuple[float, ...]

    def _score(self, X):
        z = sum((X[:, f] - c) / s for f, c, s in zip(self.features, self.centers, self.scales))
        return (z > 0).astype(np.float64)


@dataclass(eq=False)
class LinearModel(Model):
    """Logistic model ``sigmoid(intercept + coefficients . x)``."""

    coefficients: np.ndarray
    intercept: float = 0.0
    has_gradient = True

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        self.intercept = float(self.intercept)
        if not (np.all(np.isfinite(self.coefficients)) and np.isfinite(self.intercept)):
            raise FitError("non-finite linear model parameters")

    def logit(self, X):
        X2, single = _as_2d(X)
        z = X2 @ self.coefficients + self.intercept
        return z[0] if single else z

    def _score(self, X):
        return expit(X @ self.coefficients + self.intercept)

    def _gradient(self, X):
        s = self._score(X)
        return (s * (1.0 - s))[:, None] * self.coefficients[None, :]


@dataclass(eq=False)
class MlpModel(Model):
    """One tanh hidden layer followed by a sigmoid output unit."""

    W1: np.ndarray  # hidden x features
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    has_gradient = True

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = float(self.b2)

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    def _score(self, X):
        h = np.tanh(X @ self.W1.T + self.b1)
        return expit(h @ self.w2 + self.b2)

    def _gradient(self, X):
        h = np.tanh(X @ self.W1.T + self.b1)
        s = expit(h @ self.w2 + self.b2)
        back = (1.0 - h * h) * self.w2[None, :]
        return (s * (1.0 - s))[:, None] * (back @ self.W1)


# ------------------------------------------------------------------ fitting


def _check_labels(ds: Dataset, labels) -> np.ndarray:
    y = ds.labels if labels is None else np.asarray(labels)
    if y is None:
        raise FitError("no labels supplied")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (ds.n_rows,) or not np.all((y == 0) | (y == 1)):
        raise FitError("labels must be a 0/1 vector with one entry per row")
    if y.min() == y.max():
        raise FitError("labels contain a single class")
    return y


def fit_logistic(ds: Dataset, labels=None, l2: float = L2_STRENGTH,
                 tol: float = 1e-6, max_iter: int = 10_000) -> LinearModel:
    """L2-regularized logistic regression on ``ds.features`` by damped Newton steps.

    Minimizes ``mean log-loss + l2/2 * |beta|^2`` (intercept unpenalized) until
    the gradient norm falls below ``tol``.
    """
    y = _check_labels(ds, labels)
    X = np.hstack([np.ones((ds.n_rows, 1)), ds.features])
    nu, p = X.shape
    penalty = np.full(p, l2)
    penalty[0] = 0.0
    theta = np.zeros(p)

    def objective(th):
        z = X @ th
        return np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * np.sum(penalty * th * th)

    f = objective(theta)
    for it in range(max_iter):
        s = expit(X @ theta)
        grad = X.T @ (s - y) / nu + penalty * theta
        if np.linalg.norm(grad) <= tol:
            break
        H = (X.T * (s * (1 - s))) @ X / nu + np.diag(penalty) + 1e-12 * np.eye(p)
        step = np.linalg.solve(H, grad)
        t = 1.0
        while True:
            cand = theta - t * step
            fc = objective(cand)
            if fc <= f - 1e-4 * t * grad @ step or t < 1e-10:
                break
            t *= 0.5
        theta, f = cand, fc
    else:
        logger.warning("logistic fit hit max_iter=%d with |grad|=%.3g", max_iter, np.linalg.norm(grad))
    return LinearModel(theta[1:].copy(), float(theta[0]))


def fit_mlp(ds: Dataset, labels=None, hidden: int = 16, seed: int = 0,
            l2: float = L2_STRENGTH, max_iter: int = 5000) -> MlpModel:
    """Fit a one-hidden-layer tanh network with L-BFGS; deterministic given ``seed``."""
    if hidden < 1:
        raise ConfigError("hidden must be >= 1")
    y = _check_labels(ds, labels)
    X = ds.features
    nu, N = X.shape
    rng = substream(seed, 0)
    W1 = rng.normal(scale=1.0 / np.sqrt(N), size=(hidden, N))
    b1 = rng.normal(scale=0.1, size=hidden)
    w2 = rng.normal(scale=1.0 / np.sqrt(hidden), size=hidden)
    shapes = [(hidden, N), (hidden,), (hidden,), ()]
    sizes = [int(np.prod(s)) for s in shapes]

    def unpack(theta):
        parts, at = [], 0
        for shp, size in zip(shapes, sizes):
            parts.append(theta[at:at + size].reshape(shp))
            at += size
        return parts

    def loss_grad(theta):
        W1, b1, w2, b2 = unpack(theta)
        h = np.tanh(X @ W1.T + b1)
        z = h @ w2 + b2
        loss = np.mean(np.logaddexp(0.0, z) - y * z)
        loss += 0.5 * l2 * (np.sum(W1 * W1) + np.sum(w2 * w2))
        dz = (expit(z) - y) / nu
        g_w2 = h.T @ dz + l2 * w2
        g_b2 = dz.sum()
        dh = np.outer(dz, w2) * (1 - h * h)
        g_W1 = dh.T @ X + l2 * W1
        g_b1 = dh.sum(axis=0)
        return loss, np.concatenate([g_W1.ravel(), g_b1, g_w2, [g_b2]])

    theta0 = np.concatenate([W1.ravel(), b1, w2, [0.0]])
    res = minimize(loss_grad, theta0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": 1e-8, "ftol": 1e-12})
    W1, b1, w2, b2 = unpack(res.x)
    return MlpModel(W1.copy(), b1.copy(), w2.copy(), float(b2))


# ---------------------------------------------------------------- scaffold


def lime_style_perturbations(X: np.ndarray, width: float, copies: int, rng) -> np.ndarray:
    """Gaussian copies ``x + N(0, width^2 I)`` of every row."""
    rep = np.repeat(X, copies, axis=0)
    return rep + rng.normal(scale=width, size=rep.shape)


def shap_style_perturbations(X: np.ndarray, background: np.ndarray, copies: int, rng) -> np.ndarray:
    """Coalition hybrids: each coordinate kept or replaced by ``background``.

    All-kept and all-replaced coalitions are excluded, as in kernel SHAP sampling.
    """
    rep = np.repeat(X, copies, axis=0)
    N = X.shape[1]
    if N == 1:
        return np.broadcast_to(background, rep.shape).copy()
    keep = rng.random(rep.shape) < 0.5
    sizes = keep.sum(axis=1)
    bad = (sizes == 0) | (sizes == N)
    while bad.any():
        keep[bad] = rng.random((int(bad.sum()), N)) < 0.5
        sizes = keep.sum(axis=1)
        bad = (sizes == 0) | (sizes == N)
    return np.where(keep, rep, background[None, :])


def _median_rule(col: np.ndarray, feature: int, name: str) -> ThresholdModel:
    med = float(np.median(col))
    if np.any(col > med) and not np.all(col > med):
        return ThresholdModel(feature, med)
    # discrete column whose median equals its maximum
    if np.any(col >= med) and not np.all(col >= med):
        logger.info("feature %s: using >= median rule", name)
        return ThresholdModel(feature, med, inclusive=True)
    raise FitError(f"feature {name!r} is constant; no threshold rule")


@dataclass(eq=False)
class ScaffoldedModel(Model):
    """Routes detector-"real" inputs to a biased model and "synthetic" ones to an innocuous model."""

    biased_model: Model
    innocuous_model: Model
    ood_detector: KnnModel
    attack: str = "lime"
    protected: int = 0
    foils: tuple[int, ...] = ()
    detector_accuracy: dict = field(default_factory=dict)

    def is_synthetic(self, X) -> np.ndarray:
        X2, _ = _as_2d(X)
        return self.ood_detector.predict_points(X2[:, list(self.ood_detector.subset)]).astype(bool)

    def _score(self, X):
        synthetic = self.is_synthetic(X)
        out = self.biased_model.predict_score(X).astype(np.float64)
        if synthetic.any():
            out[synthetic] = self.innocuous_model.predict_score(X[synthetic])
        return out


def build_scaffold(ds: Dataset, protected: int, foil: int | tuple[int, ...], seed: int = 0,
                   attack: str = "lime", width: float = 0.5, copies: int = 50, k: int = 5,
                   n_check: int = 2, real_repeats: int | None = None) -> ScaffoldedModel:
    """Train a real-vs-synthetic k-NN detector and wrap biased/innocuous median rules around it.

    ``ds`` is used as given (callers standardize first). ``foil`` may name one or
    two features; with two the innocuous rule thresholds their standardized sum.

    Each real row enters the detector's training set ``real_repeats`` times
    (default ``ceil(k / 2)``), so a dataset row always finds a majority of
    "real" neighbours at distance zero; ``copies`` perturbed copies per row
    make up the synthetic class.
    """
    foils = (foil,) if np.isscalar(foil) else tuple(foil)
    foils = tuple(int(f) for f in foils)
    N = ds.n_features
    for j in (protected, *foils):
        if not 0 <= j < N:
            raise ConfigError(f"feature index {j} outside [0, {N})")
    if protected in foils or len(set(foils)) != len(foils) or not 1 <= len(foils) <= 2:
        raise ConfigError("protected and foil features must be 1-3 distinct indices")
    if attack not in ("lime", "shap"):
        raise ConfigError(f"unknown attack target {attack!r}")
    repeats = (k + 1) // 2 if real_repeats is None else int(real_repeats)
    if repeats < 1 or copies < 1:
        raise ConfigError("real_repeats and copies must be >= 1")
    X = ds.features
    name = ds.column_names
    if np.all(X[:, protected] == X[0, protected]):
        raise FitError(f"protected feature {name[protected]!r} is constant")
    biased = _median_rule(X[:, protected], protected, name[protected])
    if len(foils) == 1:
        innocuous: Model = _median_rule(X[:, foils[0]], foils[0], name[foils[0]])
    else:
        innocuous = SumThresholdModel(
            foils,
            tuple(float(np.median(X[:, f])) for f in foils),
            tuple(float(ds.std[f]) if not ds.is_standardized else 1.0 for f in foils),
        )

    rng = substream(seed, 0)
    background = X.mean(axis=0)

    def perturb(copies_, rng_):
        if attack == "lime":
            return lime_style_perturbations(X, width, copies_, rng_)
        return shap_style_perturbations(X, background, copies_, rng_)

    fake = perturb(copies, rng)
    train = np.vstack([np.repeat(X, repeats, axis=0), fake])
    is_fake = np.concatenate([np.zeros(ds.n_rows * repeats, np.int8), np.ones(fake.shape[0], np.int8)])
    detector = fit_on_matrix(train, is_fake, range(N), k, exclude_self=False)
    scaffold = ScaffoldedModel(biased, innocuous, detector, attack, int(protected), foils)

    real_match = np.mean(scaffold.predict_label(X) == biased.predict_label(X))
    held_out = perturb(n_check, substream(seed, 1))
    fake_match = np.mean(scaffold.predict_label(held_out) == innocuous.predict_label(held_out))
    scaffold.detector_accuracy = {"real_rows": float(real_match), "perturbed_rows": float(fake_match)}
    logger.info("scaffold detector agreement: %s", scaffold.detector_accuracy)
    return scaffold


# ------------------------------------------------------------- persistence


def model_to_dict(m: Model, ds: Dataset | None = None) -> dict:
    if isinstance(m, LinearModel):
        kind, params = "logistic", {"coefficients": m.coefficients.tolist(), "intercept": m.intercept}
    elif isinstance(m, MlpModel):
        kind, params = "mlp", {"W1": m.W1.tolist(), "b1": m.b1.tolist(), "w2": m.w2.tolist(), "b2": m.b2}
    elif isinstance(m, ThresholdModel):
        kind, params = "threshold", {"feature": m.feature, "threshold": m.threshold, "inclusive": m.inclusive}
    else:
        raise CapabilityError(f"cannot serialize {type(m).__name__}")
    doc = {"type": kind, "parameters": params, "column_names": None, "standardization": None}
    if ds is not None:
        doc["column_names"] = list(ds.column_names)
        doc["standardization"] = {"mean": ds.mean.tolist(), "std": ds.std.tolist()}
    return doc


def model_from_dict(doc: dict) -> Model:
    try:
        kind, p = doc["type"], doc["parameters"]
        if kind == "logistic":
            return LinearModel(np.array(p["coefficients"], dtype=np.float64), p["intercept"])
        if kind == "mlp":
            return MlpModel(np.array(p["W1"]), np.array(p["b1"]), np.array(p["w2"]), p["b2"])
        if kind == "threshold":
            return ThresholdModel(int(p["feature"]), float(p["threshold"]), bool(p.get("inclusive", False)))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model document: {exc}") from None
    raise DataError(f"unknown model type {doc.get('type')!r}")


def save_model(m: Model, path, ds: Dataset | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(m, ds), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> tuple[Model, dict]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(doc), doc
