"""Synthetic stand-ins shaped like the credit / criminal-justice benchmark tables.

Each stand-in mixes binary, integer and continuous columns, carries a 0/1
``target`` from a logistic rule over a few columns, and includes two random
``unrelated_column_*`` features used as fairwashing foils.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..core import ConfigError, Dataset, substream

FOILS = ("unrelated_column_one", "unrelated_column_two")


@dataclass(frozen=True)
class StandinSchema:
    name: str
    columns: tuple[tuple, ...]  # (name, kind, *params)
    label_weights: dict
    protected: str
    n_rows: int


SCHEMAS = {
    "german": StandinSchema(
        "german",
        (
            ("gender", "binary", 0.31),
            ("age", "normal_int", 35.5, 11.4, 19, 75),
            ("duration", "normal_int", 20.9, 12.1, 4, 72),
            ("credit_amount", "lognormal", 7.8, 0.77),
            ("installment_rate", "int", 1, 4),
            ("num_dependents", "binary", 0.15),
            ("checking_account", "int", 0, 3),
            ("unrelated_column_one", "binary", 0.5),
            ("unrelated_column_two", "binary", 0.5),
        ),
        {"duration": -0.8, "credit_amount": -0.5, "checking_account": 0.9, "age": 0.3},
        "gender",
        600,
    ),
    "compas": StandinSchema(
        "compas",
        (
            ("race", "binary", 0.4),
            ("age", "normal_int", 34.5, 11.7, 18, 80),
            ("sex", "binary", 0.19),
            ("priors_count", "poisson", 3.2),
            ("length_of_stay", "lognormal", 1.5, 1.2),
            ("c_charge_degree", "binary", 0.35),
            ("unrelated_column_one", "binary", 0.5),
            ("unrelated_column_two", "binary", 0.5),
        ),
        {"priors_count": 1.1, "age": -0.7, "length_of_stay": 0.3},
        "race",
        800,
    ),
    "communities": StandinSchema(
        "communities",
        (
            ("racePctWhite", "beta", 5.0, 1.6),
            ("population", "lognormal", 10.5, 1.0),
            ("medIncome", "normal", 0.36, 0.21),
            ("pctUnemployed", "beta", 2.0, 5.0),
            ("pctPoverty", "beta", 1.5, 4.0),
            ("pctDivorced", "beta", 4.0, 6.0),
            ("numPolice", "poisson", 12.0),
            ("unrelated_column_one", "binary", 0.5),
            ("unrelated_column_two", "binary", 0.5),
        ),
        {"pctPoverty": 0.9, "pctUnemployed": 0.6, "medIncome": -0.5},
        "racePctWhite",
        600,
    ),
    "adult": StandinSchema(
        "adult",
        (
            ("age", "normal_int", 38.6, 13.6, 17, 90),
            ("education_num", "int", 1, 16),
            ("hours_per_week", "normal_int", 40.4, 12.3, 1, 99),
            ("capital_gain", "lognormal", 2.0, 2.5),
            ("sex", "binary", 0.67),
            ("married", "binary", 0.47),
            ("race", "binary", 0.85),
        ),
        {"education_num": 1.0, "married": 1.2, "age": 0.6, "hours_per_week": 0.5, "capital_gain": 0.4},
        "sex",
        600,
    ),
    "heloc": StandinSchema(
        "heloc",
        (
            ("external_risk_estimate", "normal_int", 72.0, 9.8, 33, 94),
            ("months_since_oldest_trade", "normal_int", 200.0, 98.0, 2, 803),
            ("average_months_in_file", "normal_int", 78.0, 33.0, 4, 383),
            ("num_satisfactory_trades", "poisson", 21.0),
            ("percent_trades_never_delinquent", "beta", 9.0, 1.0),
            ("net_fraction_revolving_burden", "beta", 1.2, 2.5),
            ("num_inquiries_last_6m", "poisson", 1.4),
            ("percent_installment_trades", "beta", 2.0, 4.0),
        ),
        {"external_risk_estimate": -1.4, "net_fraction_revolving_burden": 0.8,
         "percent_trades_never_delinquent": -0.5, "num_inquiries_last_6m": 0.4},
        "external_risk_estimate",
        600,
    ),
}

FAIRWASH_STANDINS = ("german", "compas", "communities")
BENCHMARK_STANDINS = ("german", "compas", "adult", "heloc")


def _column(kind: str, params, size: int, rng) -> np.ndarray:
    if kind == "binary":
        return (rng.random(size) < params[0]).astype(np.float64)
    if kind == "int":
        return rng.integers(params[0], params[1] + 1, size=size).astype(np.float64)
    if kind == "normal_int":
        mu, sd, lo, hi = params
        return np.clip(np.round(rng.normal(mu, sd, size)), lo, hi)
    if kind == "normal":
        return rng.normal(params[0], params[1], size)
    if kind == "lognormal":
        return np.round(rng.lognormal(params[0], params[1], size), 2)
    if kind == "poisson":
        return rng.poisson(params[0], size).astype(np.float64)
    if kind == "beta":
        return np.round(rng.beta(params[0], params[1], size), 3)
    raise ConfigError(f"unknown column kind {kind!r}")


def make_standin(name: str, n_rows: int | None = None, seed: int = 0) -> Dataset:
    """Deterministic stand-in dataset with labels."""
    if name not in SCHEMAS:
        raise ConfigError(f"unknown stand-in {name!r}; choose from {sorted(SCHEMAS)}")
    schema = SCHEMAS[name]
    rows = schema.n_rows if n_rows is None else int(n_rows)
    rng = substream(seed, sorted(SCHEMAS).index(name))
    names = tuple(c[0] for c in schema.columns)
    X = np.column_stack([_column(c[1], c[2:], rows, rng) for c in schema.columns])
    z = np.zeros(rows)
    for col, w in schema.label_weights.items():
        v = X[:, names.index(col)]
        z += w * (v - v.mean()) / (v.std() or 1.0)
    y = (rng.random(rows) < expit(1.5 * z)).astype(np.int8)
    return Dataset(X, names, y)
