"""Multi-explainer benchmark: every explainer scored by every applicable metric.

Top-n metrics are aggregated as the mean over n = 1..N. Scores are then
z-scored across explainers inside each (metric, dataset, model) cell, with
PGU negated first so that higher is always better. Ground-truth metrics are
only available for logistic regression, whose coefficients serve as ``e*``
for every datapoint.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from ..axe import axe_auc
from ..core import ConfigError, DataError, Dataset, standardize, substream
from ..explainers import EXPLAINERS, ExplainerConfig, explain_dataset
from ..groundtruth import FULL_METRICS, GROUND_TRUTH_METRICS, TOP_N_METRICS, ground_truth_per_point
from ..models import LinearModel, Model, fit_logistic, fit_mlp
from ..parallel import parallel_map
from ..reports import write_csv, write_json
from ..sensitivity import sensitivity_per_point
from .fairwash import load_fairwash_dataset

logger = logging.getLogger(__name__)

MODELS = ("lr", "mlp")
SENSITIVITY_METRICS = ("pgi", "pgu")
BENCHMARK_METRICS = ("axe", *SENSITIVITY_METRICS, *GROUND_TRUTH_METRICS)
NN_METRICS = ("axe", *SENSITIVITY_METRICS)
DEFAULT_K_VALUES = (1, 3, 5, 9)
RESULT_HEADER = ("dataset", "model", "explainer", "metric", "score", "zscore")


@dataclass(frozen=True)
class BenchmarkSpec:
    datasets: tuple[str, ...]  # "standin:<name>" or CSV paths with a target column
    models: tuple[str, ...] = MODELS
    explainers: tuple[str, ...] = EXPLAINERS
    metrics: tuple[str, ...] = BENCHMARK_METRICS
    k: int = 5
    k_values: tuple[int, ...] = DEFAULT_K_VALUES
    width: float = 0.5
    pgi_samples: int = 100
    explainer_samples: int = 1000
    max_rows: int | None = 200
    ground_truth: str = "standardized"
    mlp_hidden: int = 16
    seed: int = 0

    def __post_init__(self):
        if not self.datasets:
            raise ConfigError("benchmark needs at least one dataset")
        for field_name, values, allowed in (
            ("models", self.models, MODELS),
            ("explainers", self.explainers, EXPLAINERS),
            ("metrics", self.metrics, BENCHMARK_METRICS),
        ):
            if not values:
                raise ConfigError(f"{field_name} must not be empty")
            bad = sorted(set(values) - set(allowed))
            if bad:
                raise ConfigError(f"{field_name}: unsupported {bad}; choose from {allowed}")
        if self.k < 1 or any(k < 1 for k in self.k_values):
            raise ConfigError("k values must be >= 1")
        if self.max_rows is not None and self.max_rows < 2:
            raise ConfigError("max_rows must be >= 2 or None")
        if self.ground_truth not in ("standardized", "raw"):
            raise ConfigError("ground_truth must be 'standardized' or 'raw'")
        if not self.width > 0 or self.pgi_samples < 1 or self.explainer_samples < 1:
            raise ConfigError("width, pgi_samples and explainer_samples must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkSpec":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown benchmark fields {unknown}")
        kw = {key: tuple(v) if isinstance(v, list) else v for key, v in d.items()}
        if "datasets" not in kw:
            raise ConfigError("benchmark manifest needs 'datasets'")
        return cls(**kw)


@dataclass
class BenchmarkRow:
    dataset: str
    model: str
    explainer: str
    metric: str
    score: float
    zscore: float = 0.0


@dataclass
class BenchmarkResult:
    spec: BenchmarkSpec
    rows: list[BenchmarkRow]
    curves: dict
    axe_k_scores: dict
    k_agreement: dict

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.spec),
            "rows": [asdict(r) for r in self.rows],
            "curves": self.curves,
            "axe_k_scores": self.axe_k_scores,
            "axe_k_agreement": self.k_agreement,
        }


def zscore(values) -> np.ndarray:
    """Population z-scores; a constant vector maps to zeros."""
    v = np.asarray(values, dtype=np.float64)
    sd = v.std()
    if sd == 0 or not np.isfinite(sd):
        return np.zeros_like(v)
    return (v - v.mean()) / sd


def metrics_for(model_id: str, metrics) -> tuple[str, ...]:
    allowed = BENCHMARK_METRICS if model_id == "lr" else NN_METRICS
    return tuple(m for m in metrics if m in allowed)


def _load(source: str, spec: BenchmarkSpec) -> tuple[str, Dataset, Dataset]:
    """Returns the name, the standardized training data and the evaluation rows."""
    name, ds = load_fairwash_dataset(source)
    if ds.labels is None:
        raise DataError(f"{source}: benchmark datasets need a 'target' column")
    Z = standardize(ds)
    rows = np.arange(Z.n_rows)
    if spec.max_rows is not None and spec.max_rows < Z.n_rows:
        rows = np.sort(substream(spec.seed, 5).choice(Z.n_rows, size=spec.max_rows, replace=False))
    evaluation = Dataset(Z.features[rows], Z.column_names, Z.labels[rows])
    return name, Z, evaluation


def _fit(model_id: str, Z: Dataset, spec: BenchmarkSpec) -> Model:
    if model_id == "lr":
        return fit_logistic(Z)
    return fit_mlp(Z, hidden=spec.mlp_hidden, seed=spec.seed)


def _ground_truth(m: LinearModel, Z: Dataset, mode: str) -> np.ndarray:
    # the model is fit on standardized columns; raw-unit weights divide by the column scale
    if mode == "standardized":
        return m.coefficients.copy()
    return m.coefficients / Z.std


def _score_cell(m: Model, ev: Dataset, E: np.ndarray, metrics, spec: BenchmarkSpec,
                e_star: np.ndarray | None) -> tuple[dict, dict, dict]:
    N = ev.n_features
    scores, curves, axe_k = {}, {}, {}
    y_preds = m.predict_label(ev.features)
    if "axe" in metrics:
        ks = sorted(set(spec.k_values) | {spec.k})
        for k in ks:
            if k > ev.n_rows - 1:
                raise ConfigError(f"k={k} needs more than {ev.n_rows} evaluation rows")
            auc, curve, _ = axe_auc(ev, y_preds, E, k)
            axe_k[k] = auc
            if k == spec.k:
                scores["axe"] = auc
                curves["axe"] = [v for _, v in curve]
    for metric in metrics:
        if metric in SENSITIVITY_METRICS:
            curve = [
                float(np.mean(sensitivity_per_point(metric, m, ev.features, E, n, spec.width,
                                                    spec.pgi_samples, spec.seed + n)))
                for n in range(1, N + 1)
            ]
            scores[metric] = float(np.mean(curve))
            curves[metric] = curve
        elif metric in TOP_N_METRICS:
            curve = [float(np.mean(ground_truth_per_point(metric, E, e_star, n))) for n in range(1, N + 1)]
            scores[metric] = float(np.mean(curve))
            curves[metric] = curve
        elif metric in FULL_METRICS:
            scores[metric] = float(np.mean(ground_truth_per_point(metric, E, e_star)))
    return scores, curves, axe_k


def k_agreement(axe_k_scores: dict, explainers, threshold: float = 0.8) -> dict:
    """Per (dataset, model) cell: do AXE rankings of explainers agree across k?

    A cell agrees when every pair of k values ranks the explainers with
    Spearman correlation at least ``threshold`` (identical constant rankings
    count as agreeing).
    """
    cells = {}
    for cell, by_explainer in axe_k_scores.items():
        ks = sorted({k for v in by_explainer.values() for k in v})
        vectors = {k: np.array([by_explainer[e][k] for e in explainers]) for k in ks}
        worst = 1.0
        for a, b in combinations(ks, 2):
            va, vb = vectors[a], vectors[b]
            if np.all(va == va[0]) or np.all(vb == vb[0]):
                rho = 1.0 if np.array_equal(va, vb) else 0.0
            else:
                rho = float(spearmanr(va, vb).statistic)
            worst = min(worst, rho)
        cells[cell] = {"min_pairwise_spearman": worst, "agrees": bool(worst >= threshold)}
    frac = float(np.mean([c["agrees"] for c in cells.values()])) if cells else 0.0
    return {"threshold": threshold, "cells": cells, "fraction_agreeing": frac}


def run_benchmark(spec: BenchmarkSpec, jobs: int = 1) -> BenchmarkResult:
    """Cross-product evaluation; ``jobs`` only changes speed, never the numbers."""
    jobs = max(1, int(jobs))
    tasks = []
    for source in spec.datasets:
        name, Z, ev = _load(source, spec)
        for model_id in spec.models:
            logger.info("benchmark: fitting %s on %s", model_id, name)
            m = _fit(model_id, Z, spec)
            e_star = _ground_truth(m, Z, spec.ground_truth) if model_id == "lr" else None
            metrics = metrics_for(model_id, spec.metrics)
            for explainer in spec.explainers:
                tasks.append((name, model_id, explainer, m, ev, metrics, e_star))

    def run(task):
        name, model_id, explainer, m, ev, metrics, e_star = task
        if explainer in ("grad", "input_x_grad", "smoothgrad", "integrated_gradients") and not m.has_gradient:
            raise ConfigError(f"{explainer} needs a differentiable model")
        cfg = ExplainerConfig(explainer, sample_count=spec.explainer_samples, seed=spec.seed)
        E = explain_dataset(m, ev, cfg)
        return _score_cell(m, ev, E, metrics, spec, e_star)

    outputs = parallel_map(run, tasks, jobs)

    rows: list[BenchmarkRow] = []
    curves: dict = {}
    axe_k_scores: dict = {}
    for (name, model_id, explainer, *_), (scores, cell_curves, axe_k) in zip(tasks, outputs):
        key = f"{name}/{model_id}"
        for metric, value in scores.items():
            rows.append(BenchmarkRow(name, model_id, explainer, metric, value))
        curves.setdefault(key, {})[explainer] = cell_curves
        if axe_k:
            axe_k_scores.setdefault(key, {})[explainer] = axe_k

    # z-score across explainers inside each (metric, dataset, model) cell
    groups: dict[tuple[str, str, str], list[BenchmarkRow]] = {}
    for r in rows:
        groups.setdefault((r.dataset, r.model, r.metric), []).append(r)
    for (_, _, metric), members in groups.items():
        raw = np.array([r.score for r in members])
        z = zscore(-raw if metric == "pgu" else raw)
        for r, v in zip(members, z):
            r.zscore = float(v)

    agreement = k_agreement(axe_k_scores, spec.explainers) if axe_k_scores else {}
    return BenchmarkResult(spec, rows, curves, axe_k_scores, agreement)


def write_benchmark(result: BenchmarkResult, out_dir) -> list[Path]:
    """benchmark.csv, benchmark.json and per-dataset plot data (fig7 for the MLP, fig8 for LR)."""
    out = Path(out_dir)
    written = [
        write_csv(out / "benchmark.csv", RESULT_HEADER,
                  [(r.dataset, r.model, r.explainer, r.metric, r.score, r.zscore) for r in result.rows]),
        write_json(out / "benchmark.json", result.to_dict()),
    ]
    for model_id, fig in (("mlp", "fig7"), ("lr", "fig8")):
        for name in sorted({r.dataset for r in result.rows if r.model == model_id}):
            sel = [r for r in result.rows if r.model == model_id and r.dataset == name]
            written.append(write_csv(out / f"{fig}_{name}.csv", ("explainer", "metric", "score", "zscore"),
                                     [(r.explainer, r.metric, r.score, r.zscore) for r in sel]))
    if result.k_agreement:
        cells = result.k_agreement["cells"]
        written.append(write_csv(
            out / "axe_k_agreement.csv", ("cell", "min_pairwise_spearman", "agrees"),
            [(c, v["min_pairwise_spearman"], v["agrees"]) for c, v in sorted(cells.items())],
        ))
    return written
