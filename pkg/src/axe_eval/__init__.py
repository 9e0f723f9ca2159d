"""Evaluate feature-importance explanations of binary classifiers on tabular data.

The central metric is AXE: how well a k-NN voter restricted to an
explanation's top-n features recovers the model's own predictions. Ground-truth
metrics (FA, RA, SA, SRA, RC, PRA) and perturbation metrics (PGI, PGU) are
provided for comparison.
"""

from .axe import AxeResult, axe_auc, axe_score, evaluate_axe
from .core import (
    AxeError,
    BoundsError,
    CapabilityError,
    ConfigError,
    DataError,
    Dataset,
    EvalConfig,
    Explanation,
    FitError,
    QualityReport,
    read_dataset_csv,
    read_explanations_csv,
    standardize,
    write_dataset_csv,
    write_explanations_csv,
)
from .explainers import EXPLAINERS, ExplainerConfig, explain, explain_dataset
from .groundtruth import GROUND_TRUTH_METRICS, ground_truth_metric
from .knn import KnnModel, knn_fit, knn_predict
from .models import ScaffoldedModel, build_scaffold, fit_logistic, fit_mlp, load_model, save_model
from .sensitivity import pgi, pgu, sensitivity_per_point

__version__ = "0.1.0"

__all__ = [
    "AxeError", "AxeResult", "BoundsError", "CapabilityError", "ConfigError", "DataError", "Dataset",
    "EXPLAINERS", "EvalConfig", "Explanation", "ExplainerConfig", "FitError", "GROUND_TRUTH_METRICS",
    "KnnModel", "QualityReport", "ScaffoldedModel", "axe_auc", "axe_score", "build_scaffold",
    "evaluate_axe", "explain", "explain_dataset", "fit_logistic", "fit_mlp", "ground_truth_metric",
    "knn_fit", "knn_predict", "load_model", "pgi", "pgu", "read_dataset_csv", "read_explanations_csv",
    "save_model", "sensitivity_per_point", "standardize", "write_dataset_csv", "write_explanations_csv",
]
