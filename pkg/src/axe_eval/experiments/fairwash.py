"""Fairwashing detection: can a metric tell protected-feature explanations from foils?

A scaffolded model decides on the protected feature for real rows but answers
with a foil-based rule on explainer-style perturbations. One-hot explanation
sets name the protected feature, a foil, or any other feature as most
important; a useful metric scores the protected set above every foil set.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..axe import axe_score
from ..core import ConfigError, Dataset, read_dataset_csv, standardize, substream, top_n_features
from ..explainers import ExplainerConfig, explain_kernelshap, explain_lime
from ..models import build_scaffold
from ..reports import write_csv, write_json
from ..sensitivity import sensitivity_per_point
from .standins import FOILS, SCHEMAS, make_standin

FAIRWASH_METRICS = ("pgi", "pgu", "axe")
TABLE_HEADER = ("dataset", "model", "metric", "E_rho", "E_phi", "E_psi", "E_omega", "pass")


@dataclass(frozen=True)
class FairwashSpec:
    dataset: str  # CSV path or "standin:<name>"
    protected: str
    foils: tuple[str, ...]
    attack: str = "lime"
    metrics: tuple[str, ...] = FAIRWASH_METRICS
    n: int = 1
    k: int = 5
    width: float = 1.0
    pgi_samples: int = 20
    pgi_rows: int | None = 100  # rows scored by PGI/PGU; None means all
    detector_copies: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.attack not in ("lime", "shap"):
            raise ConfigError("attack must be 'lime' or 'shap'")
        if not 1 <= len(self.foils) <= 2:
            raise ConfigError("one or two foil features required")
        if self.n != 1:
            raise ConfigError("fairwash sets are one-hot; n must be 1")
        unknown = set(self.metrics) - set(FAIRWASH_METRICS)
        if unknown:
            raise ConfigError(f"unsupported fairwash metrics {sorted(unknown)}")
        if self.pgi_rows is not None and self.pgi_rows < 1:
            raise ConfigError("pgi_rows must be >= 1 or None")

    @property
    def model_label(self) -> str:
        tag = "m_L" if self.attack == "lime" else "m_S"
        return f"{tag} ({len(self.foils)} foil{'s' if len(self.foils) > 1 else ''})"


@dataclass
class FairwashRow:
    dataset: str
    model: str
    metric: str
    rho: float
    phi: float
    psi: float | None
    omega: float | None
    passed: bool
    margin: float

    def cells(self):
        na = "na"
        return (
            self.dataset, self.model, self.metric, self.rho, self.phi,
            na if self.psi is None else self.psi, na if self.omega is None else self.omega, self.passed,
        )


@dataclass
class FairwashResult:
    spec: FairwashSpec
    dataset_name: str
    rows: list[FairwashRow]
    detector_accuracy: dict
    attack_success: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.spec),
            "dataset": self.dataset_name,
            "detector_accuracy": self.detector_accuracy,
            "attack_success": self.attack_success,
            "rows": [asdict(r) for r in self.rows],
        }


def load_fairwash_dataset(source: str) -> tuple[str, Dataset]:
    if source.startswith("standin:"):
        name = source.split(":", 1)[1]
        return name, make_standin(name)
    ds = read_dataset_csv(source)
    return Path(source).stem, ds


def one_hot_set(n_rows: int, n_features: int, feature: int) -> np.ndarray:
    E = np.zeros((n_rows, n_features))
    E[:, feature] = 1.0
    return E


def _attack_success(scaffold, ds: Dataset, spec: FairwashSpec, points: int = 20) -> dict:
    """Fraction of sampled rows whose targeted explainer ranks a foil / the protected feature first."""
    cfg = ExplainerConfig("lime" if spec.attack == "lime" else "kernelshap", sample_count=200,
                          noise_width=spec.width, seed=spec.seed)
    rows = substream(spec.seed, 7).choice(ds.n_rows, size=min(points, ds.n_rows), replace=False)
    tops = []
    for i in sorted(rows.tolist()):
        x = ds.features[i]
        rng = substream(spec.seed, 1000 + i)
        if spec.attack == "lime":
            e = explain_lime(scaffold, x, ds, cfg, rng)
        else:
            e = explain_kernelshap(scaffold, x, ds, cfg, rng)
        tops.append(int(top_n_features(e, 1)[0]))
    tops = np.array(tops)
    return {
        "explainer": cfg.explainer_id,
        "points": int(tops.size),
        "top_is_foil": float(np.mean(np.isin(tops, scaffold.foils))),
        "top_is_protected": float(np.mean(tops == scaffold.protected)),
    }


def run_fairwash(spec: FairwashSpec, ds: Dataset | None = None, dataset_name: str | None = None,
                 attack_check: bool = True) -> FairwashResult:
    """Build the scaffold, score one-hot explanation sets and check the ordering per metric."""
    if ds is None:
        dataset_name, ds = load_fairwash_dataset(spec.dataset)
    dataset_name = dataset_name or spec.dataset
    for name in (spec.protected, *spec.foils):
        if name not in ds.column_names:
            raise ConfigError(f"feature {name!r} not in dataset {dataset_name!r}")
    Z = standardize(ds)
    rho = Z.column_index(spec.protected)
    foils = [Z.column_index(f) for f in spec.foils]
    scaffold = build_scaffold(Z, rho, tuple(foils), spec.seed, spec.attack, spec.width, spec.detector_copies)
    X = Z.features
    y_preds = scaffold.predict_label(X)
    others = [j for j in range(Z.n_features) if j != rho and j not in foils]
    # PGI/PGU query the detector per sample, so they run on a fixed row subsample
    sub = np.arange(Z.n_rows)
    if spec.pgi_rows is not None and spec.pgi_rows < Z.n_rows:
        sub = np.sort(substream(spec.seed, 3).choice(Z.n_rows, size=spec.pgi_rows, replace=False))

    def set_scores(metric: str, feature: int) -> np.ndarray:
        E = one_hot_set(Z.n_rows, Z.n_features, feature)
        if metric == "axe":
            return axe_score(Z, y_preds, E, 1, spec.k).correct
        # PGU: lower is better, so compare its negation
        vals = sensitivity_per_point(metric, scaffold, X[sub], E[sub], 1, spec.width, spec.pgi_samples,
                                     spec.seed, indices=sub)
        return -vals if metric == "pgu" else vals

    rows = []
    for metric in spec.metrics:
        q_rho = float(np.mean(set_scores(metric, rho)))
        q_foils = [float(np.mean(set_scores(metric, f))) for f in foils]
        q_omega = float(np.mean([np.mean(set_scores(metric, j)) for j in others])) if others else None
        margin = min(q_rho - q for q in q_foils)
        label = "(-)pgu" if metric == "pgu" else metric
        rows.append(FairwashRow(
            dataset_name, spec.model_label, label, q_rho, q_foils[0],
            q_foils[1] if len(q_foils) > 1 else None, q_omega, bool(margin > 0), margin,
        ))
    success = _attack_success(scaffold, Z, spec) if attack_check else {}
    return FairwashResult(spec, dataset_name, rows, scaffold.detector_accuracy, success)


def standin_specs(seed: int = 0, **overrides) -> list[FairwashSpec]:
    """Both attacks with one and two foils on every fairwashing stand-in."""
    specs = []
    for name in ("german", "compas", "communities"):
        protected = SCHEMAS[name].protected
        for attack in ("lime", "shap"):
            for foils in (FOILS[:1], FOILS):
                specs.append(FairwashSpec(f"standin:{name}", protected, tuple(foils), attack, seed=seed, **overrides))
    return specs


def write_fairwash(results: list[FairwashResult], out_dir) -> list[Path]:
    out = Path(out_dir)
    table = [row.cells() for r in results for row in r.rows]
    return [
        write_csv(out / "table2.csv", TABLE_HEADER, table),
        write_json(out / "fairwash.json", {"runs": [r.to_dict() for r in results]}),
    ]
