"""Command-line interface: ``axe-eval <command> [options]``.

Exit codes: 0 success, 2 invalid configuration, 3 unreadable or unusable data.
Every report embeds the fully resolved configuration. Output paths and the
job count are left out of it, so reruns write byte-identical files.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .axe import evaluate_axe
from .core import (
    AxeError,
    CapabilityError,
    ConfigError,
    DataError,
    Dataset,
    EvalConfig,
    FitError,
    QualityReport,
    read_dataset_csv,
    read_explanations_csv,
    standardize,
    write_dataset_csv,
    write_explanations_csv,
)
from .explainers import EXPLAINERS, ExplainerConfig, explain_dataset
from .groundtruth import FULL_METRICS, GROUND_TRUTH_METRICS, TOP_N_METRICS, ground_truth_metric
from .models import LinearModel, Model, fit_logistic, fit_mlp, load_model
from .reports import read_json, write_csv, write_json
from .sensitivity import sensitivity_per_point

logger = logging.getLogger("axe_eval")

SEED_ENV = "AXE_EVAL_SEED"
EVALUATE_METRICS = ("axe", "pgi", "pgu", *GROUND_TRUTH_METRICS)
EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        value = seed
    else:
        raw = os.environ.get(SEED_ENV)
        if raw is None:
            return 0
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from None
    if value < 0:
        raise ConfigError("seed must be non-negative")
    return value


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_n(text: str) -> int | str:
    if text == "auc":
        return "auc"
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"--n must be an integer or 'auc', got {text!r}") from None


# ---------------------------------------------------------------- evaluate


def _resolve_model(spec: str, Z: Dataset, seed: int) -> tuple[Model, np.ndarray, dict]:
    """Model plus the feature matrix in the model's own input coordinates."""
    if spec == "lr":
        return fit_logistic(Z), Z.features, {"builtin": "lr"}
    if spec == "mlp":
        return fit_mlp(Z, seed=seed), Z.features, {"builtin": "mlp"}
    m, doc = load_model(spec)
    names = doc.get("column_names")
    if names is not None and tuple(names) != Z.column_names:
        raise DataError(f"{spec}: model columns {names} do not match the data columns")
    stats = doc.get("standardization")
    if stats is None:
        coords = Z.features
    else:
        mean = np.asarray(stats["mean"], dtype=np.float64)
        std = np.asarray(stats["std"], dtype=np.float64)
        coords = (Z.destandardize(Z.features) - mean) / std
    return m, coords, {"file": spec, "type": doc.get("type")}


def _ground_truth(m: Model, path: str | None, ds: Dataset) -> np.ndarray:
    """Ground-truth matrix, one row per datapoint."""
    if path is not None:
        return read_explanations_csv(path, ds.n_rows, ds.n_features)
    if isinstance(m, LinearModel):
        return np.tile(m.coefficients, (ds.n_rows, 1))
    raise ConfigError("ground-truth metrics need --ground-truth or a logistic model")


def _curve_report(metric: str, n, N: int, per_n) -> QualityReport:
    """Report for an integer ``n`` or averaged over n = 1..N."""
    if n == "auc":
        values = [per_n(j) for j in range(1, N + 1)]
        per_point = np.mean(values, axis=0)
        curve = tuple((j, float(np.mean(v))) for j, v in zip(range(1, N + 1), values))
        return QualityReport(metric, per_point, "auc", curve, {"aggregation": "mean over n=1..N"})
    return QualityReport(metric, per_n(int(n)), int(n))


def cmd_evaluate(args) -> int:
    seed = resolve_seed(args.seed)
    metrics = tuple(m.strip() for m in args.metric.split(",") if m.strip())
    bad = sorted(set(metrics) - set(EVALUATE_METRICS))
    if not metrics or bad:
        raise ConfigError(f"--metric: unsupported {bad or metrics}; choose from {EVALUATE_METRICS}")
    n = _parse_n(args.n)
    eval_cfg = EvalConfig(top_n=1 if n == "auc" else n, k_neighbors=args.k, perturb_width=args.width,
                          perturb_samples=args.samples, seed=seed, aggregate_auc=n == "auc")
    ds = read_dataset_csv(args.data)
    eval_cfg.validate_for(ds.n_features)
    Z = standardize(ds)
    m, coords, model_info = _resolve_model(args.model, Z, seed)
    work = Dataset(coords, Z.column_names, Z.labels)
    N = work.n_features

    explainer_info: dict
    if args.explainer in EXPLAINERS:
        ecfg = ExplainerConfig(args.explainer, sample_count=args.explainer_samples,
                               noise_width=args.explainer_width, seed=seed)
        E = explain_dataset(m, work, ecfg, jobs=args.jobs)
        explainer_info = ecfg.to_dict()
    else:
        E = read_explanations_csv(args.explainer, work.n_rows, N)
        explainer_info = {"file": args.explainer}

    reports: dict[str, QualityReport] = {}
    for metric in metrics:
        if metric == "axe":
            reports[metric] = evaluate_axe(m, work, E, n, args.k, exclude_self=not args.no_leave_one_out)
        elif metric in ("pgi", "pgu"):
            reports[metric] = _curve_report(metric, n, N, lambda j, metric=metric: sensitivity_per_point(
                metric, m, work.features, E, j, args.width, args.samples, seed))
            reports[metric].extra.update({"width": args.width, "samples": args.samples})
        elif metric in TOP_N_METRICS:
            G = _ground_truth(m, args.ground_truth, work)
            reports[metric] = _curve_report(metric, n, N, lambda j, metric=metric: np.array(
                [ground_truth_metric(metric, e, g, j) for e, g in zip(E, G)]))
        elif metric in FULL_METRICS:
            G = _ground_truth(m, args.ground_truth, work)
            reports[metric] = QualityReport(
                metric, np.array([ground_truth_metric(metric, e, g) for e, g in zip(E, G)]), None)

    config = {
        "command": "evaluate",
        "data": args.data,
        "model": model_info,
        "explainer": explainer_info,
        "metrics": list(metrics),
        "n": n,
        "leave_one_out": not args.no_leave_one_out,
        "ground_truth": args.ground_truth or ("coefficients" if isinstance(m, LinearModel) else None),
        "eval_config": asdict(eval_cfg),
    }
    out = Path(args.out)
    write_json(out / "report.json", {"config": config, "reports": {k: r.to_dict() for k, r in reports.items()}})
    write_csv(out / "report.csv", ("metric", "n", "aggregate"),
              [(k, r.n if r.n is not None else "", r.aggregate) for k, r in reports.items()])
    write_csv(out / "per_point.csv", ("datapoint_index", *reports),
              [(i, *(float(r.per_point[i]) for r in reports.values())) for i in range(work.n_rows)])
    if args.explainer in EXPLAINERS:
        out.mkdir(parents=True, exist_ok=True)
        write_explanations_csv(E, out / "explanations.csv")
    for k, r in reports.items():
        print(f"{k}\tn={r.n}\t{r.aggregate:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------- experiments


def cmd_synthetic(args) -> int:
    from .experiments.synthetic import DEFAULT_K_GRID, FourGaussianSpec, run_synthetic_study

    seed = resolve_seed(args.seed)
    stddevs = _float_list(args.stddev)
    if len(stddevs) == 1:
        stddevs = stddevs * 4
    if len(stddevs) != 4 or any(s <= 0 for s in stddevs):
        raise ConfigError("--stddev takes one or four positive values")
    spec = FourGaussianSpec(points_per_cluster=args.points_per_cluster, stddevs=stddevs, seed=seed)
    k_grid = _int_list(args.k_grid) if args.k_grid else DEFAULT_K_GRID
    widths = _float_list(args.width_grid) if args.width_grid else None
    if widths is not None and any(w <= 0 for w in widths):
        raise ConfigError("--width-grid values must be positive")
    limit = 4 * spec.points_per_cluster - (0 if args.no_leave_one_out else 1)
    if not k_grid or any(not 1 <= k <= limit for k in k_grid):
        raise ConfigError(f"--k-grid values must lie in [1, {limit}]")
    result = run_synthetic_study(spec, k_grid, widths, args.pgi_samples, args.manifold_samples,
                                 leave_one_out=not args.no_leave_one_out)
    result.write(args.out)
    for k, a, b in result.fig6_rows():
        print(f"k={k}\tAXE(e_a)={a:.4f}\tAXE(e_b)={b:.4f}")
    return EXIT_OK


def cmd_fairwash(args) -> int:
    from .experiments.fairwash import FairwashSpec, run_fairwash, standin_specs, write_fairwash

    seed = resolve_seed(args.seed)
    metrics = tuple(m.strip() for m in args.metrics.split(",") if m.strip())
    common = dict(metrics=metrics, k=args.k, width=args.width, pgi_samples=args.pgi_samples,
                  pgi_rows=None if args.pgi_rows == 0 else args.pgi_rows,
                  detector_copies=args.detector_copies, seed=seed)
    if args.data is None:
        specs = standin_specs(**common)
    else:
        if not args.protected or not args.foils:
            raise ConfigError("--protected and --foils are required with --data")
        foils = tuple(f.strip() for f in args.foils.split(",") if f.strip())
        attacks = ("lime", "shap") if args.attack == "both" else (args.attack,)
        specs = [FairwashSpec(args.data, args.protected, foils, a, **common) for a in attacks]
    results = [run_fairwash(s, attack_check=not args.no_attack_check) for s in specs]
    write_fairwash(results, args.out)
    print("dataset\tmodel\tmetric\tE_rho\tE_phi\tE_psi\tE_omega\tpass")
    for r in results:
        for row in r.rows:
            cells = [c if isinstance(c, str) else (f"{c:.3f}" if not isinstance(c, bool) else str(c))
                     for c in row.cells()]
            print("\t".join(cells))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    from .experiments.benchmark import BenchmarkSpec, run_benchmark, write_benchmark

    path = Path(args.manifest)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    try:
        doc = read_json(path)
    except ValueError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError("manifest must be a JSON object")
    if args.seed is not None or "seed" not in doc:
        doc = {**doc, "seed": resolve_seed(args.seed)}
    base = path.parent
    doc["datasets"] = [
        d if d.startswith("standin:") or Path(d).is_absolute() else str(base / d) for d in doc.get("datasets", [])
    ]
    spec = BenchmarkSpec.from_dict(doc)
    result = run_benchmark(spec, jobs=args.jobs)
    write_benchmark(result, args.out)
    print(f"{len(result.rows)} scores written to {args.out}")
    return EXIT_OK


def cmd_regions(args) -> int:
    from .experiments.regions import REGION_METRICS, run_region_heatmaps, write_region_heatmaps

    beta = _float_list(args.beta)
    grids = run_region_heatmaps(beta, args.resolution, args.n, REGION_METRICS)
    write_region_heatmaps(grids, args.out)
    for metric, grid in grids.items():
        print(f"{metric}\t{len(np.unique(grid))} distinct values")
    return EXIT_OK


def cmd_make_standin(args) -> int:
    from .experiments.standins import make_standin

    ds = make_standin(args.name, args.rows, resolve_seed(args.seed))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(ds, out)
    print(f"wrote {ds.n_rows} rows x {ds.n_features} features to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="axe-eval", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def seed_arg(sp):
        sp.add_argument("--seed", type=int, default=None, help=f"random seed (default: ${SEED_ENV} or 0)")

    e = sub.add_parser("evaluate", help="score explanations of one model on one dataset")
    e.add_argument("--data", required=True, help="CSV with numeric columns and optional 'target'")
    e.add_argument("--model", required=True, help="'lr', 'mlp' or a model JSON file")
    e.add_argument("--explainer", required=True, help=f"one of {', '.join(EXPLAINERS)} or an explanation CSV")
    e.add_argument("--metric", default="axe", help="comma-separated metric ids")
    e.add_argument("--n", default="1", help="top-n features, or 'auc' for the mean over n=1..N")
    e.add_argument("--k", type=int, default=5, help="neighbours for AXE")
    e.add_argument("--width", type=float, default=0.5, help="PGI/PGU perturbation stddev")
    e.add_argument("--samples", type=int, default=1000, help="PGI/PGU perturbations per point")
    e.add_argument("--explainer-samples", type=int, default=1000)
    e.add_argument("--explainer-width", type=float, default=0.5)
    e.add_argument("--ground-truth", default=None, help="explanation CSV with per-point e*")
    e.add_argument("--no-leave-one-out", action="store_true", help="let AXE voters see the query row")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--out", required=True)
    seed_arg(e)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("synthetic", help="four-Gaussian AXE vs PGI study")
    s.add_argument("--points-per-cluster", type=int, default=5000)
    s.add_argument("--stddev", default="0.8", help="one or four per-cluster stddevs")
    s.add_argument("--k-grid", default=None, help="comma-separated k values")
    s.add_argument("--width-grid", default=None, help="comma-separated widths (default 1e-3..1e2, log-spaced)")
    s.add_argument("--pgi-samples", type=int, default=1000)
    s.add_argument("--manifold-samples", type=int, default=10_000)
    s.add_argument("--no-leave-one-out", action="store_true")
    s.add_argument("--out", required=True)
    seed_arg(s)
    s.set_defaults(func=cmd_synthetic)

    f = sub.add_parser("fairwash", help="fairwashing detection table")
    f.add_argument("--data", default=None, help="CSV or 'standin:<name>'; omit to run every stand-in")
    f.add_argument("--protected", default=None)
    f.add_argument("--foils", default=None, help="one or two comma-separated feature names")
    f.add_argument("--attack", choices=("lime", "shap", "both"), default="both")
    f.add_argument("--metrics", default="pgi,pgu,axe")
    f.add_argument("--k", type=int, default=5)
    f.add_argument("--width", type=float, default=1.0)
    f.add_argument("--pgi-samples", type=int, default=20)
    f.add_argument("--pgi-rows", type=int, default=100, help="rows scored by PGI/PGU (0 = all)")
    f.add_argument("--detector-copies", type=int, default=50)
    f.add_argument("--no-attack-check", action="store_true")
    f.add_argument("--out", required=True)
    seed_arg(f)
    f.set_defaults(func=cmd_fairwash)

    b = sub.add_parser("benchmark", help="multi-explainer benchmark from a JSON manifest")
    b.add_argument("--manifest", required=True)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", required=True)
    seed_arg(b)
    b.set_defaults(func=cmd_benchmark)

    r = sub.add_parser("regions", help="ground-truth metric heatmaps over two-feature explanations")
    r.add_argument("--beta", default="0.7,0.3")
    r.add_argument("--resolution", type=int, default=100)
    r.add_argument("--n", type=int, default=2)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_regions)

    m = sub.add_parser("make-standin", help="write a synthetic stand-in dataset as CSV")
    m.add_argument("--name", required=True)
    m.add_argument("--rows", type=int, default=None)
    m.add_argument("--out", required=True)
    seed_arg(m)
    m.set_defaults(func=cmd_make_standin)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, CapabilityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FitError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AxeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
