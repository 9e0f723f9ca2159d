import itertools
from math import factorial

import numpy as np
import pytest

from axe_eval.core import ConfigError, substream
from axe_eval.explainers import (
    EXPLAINERS,
    ExplainerConfig,
    explain,
    explain_dataset,
    explain_grad,
    explain_input_x_grad,
    explain_integrated_gradients,
    explain_kernelshap,
    explain_lime,
    explain_random,
    explain_smoothgrad,
    fidelity_loss,
    lime_samples,
)
from axe_eval.models import CallableModel, ConstantModel, LinearModel, MlpModel

from conftest import make_dataset


def random_mlp(rng, N=4, hidden=6):
    return MlpModel(rng.normal(size=(hidden, N)), rng.normal(size=hidden), rng.normal(size=hidden), -0.2)


def logit_model(beta, b0=0.0):
    beta = np.asarray(beta, dtype=float)
    return CallableModel(lambda X: X @ beta + b0, lambda X: np.tile(beta, (X.shape[0], 1)))


def exact_shapley(m, x, background):
    """Subset-formula Shapley values of v(S) = score(x on S, background elsewhere)."""
    N = x.size
    def v(S):
        z = background.copy()
        z[list(S)] = x[list(S)]
        return float(m.predict_score(z))
    phi = np.zeros(N)
    for i in range(N):
        rest = [j for j in range(N) if j != i]
        for size in range(N):
            w = factorial(size) * factorial(N - size - 1) / factorial(N)
            for S in itertools.combinations(rest, size):
                phi[i] += w * (v(S + (i,)) - v(S))
    return phi


def test_grad_linear_is_proportional_to_beta(rng):
    beta = np.array([0.3, -2.0, 1.1])
    e = explain_grad(LinearModel(beta, 0.5), rng.normal(size=3))
    ratio = e / beta
    assert np.all(ratio > 0)
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)


def test_grad_constant_model_zero():
    assert np.all(explain_grad(ConstantModel(), np.ones(3)) == 0)


def test_input_x_grad(rng):
    beta = np.array([0.3, -2.0])
    m = LinearModel(beta, 0.1)
    assert np.all(explain_input_x_grad(m, np.zeros(2)) == 0)
    e = explain_input_x_grad(m, np.ones(2))
    np.testing.assert_allclose(e / beta, (e / beta)[0])
    mlp = random_mlp(rng)
    x = rng.normal(size=4)
    np.testing.assert_allclose(explain_input_x_grad(mlp, x), x * explain_grad(mlp, x), atol=1e-15)


def test_smoothgrad_limits(rng):
    mlp = random_mlp(rng)
    x = rng.normal(size=4)
    tiny = ExplainerConfig("smoothgrad", sample_count=50, noise_width=1e-7)
    np.testing.assert_allclose(explain_smoothgrad(mlp, x, tiny, substream(0)), explain_grad(mlp, x), atol=1e-6)
    lr = LinearModel(np.array([2.0, -1.0, 0.4]), 0.0)
    cfg = ExplainerConfig("smoothgrad", sample_count=1000, noise_width=0.5)
    e = explain_smoothgrad(lr, np.zeros(3), cfg, substream(1))
    assert np.argsort(-np.abs(e)).tolist() == np.argsort(-np.abs(lr.coefficients)).tolist()
    again = explain_smoothgrad(lr, np.zeros(3), cfg, substream(1))
    assert np.array_equal(e, again)


def test_integrated_gradients_properties(rng):
    cfg = ExplainerConfig("integrated_gradients", ig_steps=200)
    b = rng.normal(size=4)
    m = random_mlp(rng)
    assert np.all(explain_integrated_gradients(m, b, cfg, baseline=b) == 0)
    for model in (LinearModel(rng.normal(size=4), 0.3), m):
        for _ in range(20):
            x = rng.normal(size=4) * 2
            e = explain_integrated_gradients(model, x, cfg, baseline=b)
            assert abs(e.sum() - (model.predict_score(x) - model.predict_score(b))) <= 1e-3
    beta = np.array([1.5, -0.5, 0.0, 2.0])
    x = rng.normal(size=4)
    np.testing.assert_allclose(explain_integrated_gradients(logit_model(beta), x, cfg, baseline=b),
                               beta * (x - b), atol=1e-12)


def test_integrated_gradients_dataset_mean_baseline(rng):
    ds = make_dataset(rng.normal(2.0, 1.0, size=(30, 3)))
    m = LinearModel(np.array([1.0, 1.0, 1.0]))
    cfg = ExplainerConfig("integrated_gradients")
    e = explain_integrated_gradients(m, ds.features.mean(axis=0), cfg, ds)
    np.testing.assert_allclose(e, 0.0, atol=1e-15)


def test_lime_recovers_logit_coefficients(rng):
    beta = np.array([1.2, -0.7, 0.3, 2.0])
    cfg = ExplainerConfig("lime", sample_count=5000)
    e = explain_lime(logit_model(beta, 0.4), rng.normal(size=4), None, cfg, substream(3))
    assert np.max(np.abs(e - beta) / np.abs(beta)) <= 0.02


def test_lime_ignored_feature_gets_small_weight():
    m = LinearModel(np.array([1.5, 0.0]), 0.0)
    cfg = ExplainerConfig("lime", sample_count=1000)
    e = explain_lime(m, np.array([0.2, 1.0]), None, cfg, substream(8))
    assert abs(e[1]) <= 0.02 * np.max(np.abs(e))


def test_lime_small_width_follows_gradient(rng):
    m = random_mlp(rng)
    x = rng.normal(size=4)
    e = explain_lime(m, x, None, ExplainerConfig("lime", noise_width=1e-3), substream(2))
    g = explain_grad(m, x)
    assert e @ g / (np.linalg.norm(e) * np.linalg.norm(g)) > 0.999


def test_lime_is_exact_fidelity_minimizer(rng):
    m = random_mlp(rng)
    x = rng.normal(size=4)
    cfg = ExplainerConfig("lime", sample_count=500)
    e = explain_lime(m, x, None, cfg, substream(21))
    deltas, weights = lime_samples(x, cfg, substream(21))
    resid = m.predict_score(x + deltas) - m.predict_score(x) - deltas @ e
    assert np.max(np.abs(-2 * (weights * resid) @ deltas)) <= 1e-8
    best = fidelity_loss(m, x, e, deltas, weights)
    for _ in range(100):
        assert best <= fidelity_loss(m, x, rng.normal(size=4), deltas, weights)


@pytest.mark.parametrize("N", [2, 3, 5, 8, 10])
def test_kernelshap_equals_exact_shapley(rng, N):
    m = MlpModel(rng.normal(size=(5, N)), rng.normal(size=5), rng.normal(size=5), 0.1)
    x = rng.normal(size=N)
    bg = rng.normal(size=N)
    cfg = ExplainerConfig("kernelshap", sample_count=2 ** N)
    e = explain_kernelshap(m, x, None, cfg, substream(0), background=bg)
    np.testing.assert_allclose(e, exact_shapley(m, x, bg), atol=1e-8)


def test_kernelshap_additive_model(rng):
    g = [np.sin, np.cos, np.tanh, np.square]
    m = CallableModel(lambda X: sum(f(X[:, i]) for i, f in enumerate(g)))
    ds = make_dataset(rng.normal(size=(50, 4)))
    x = rng.normal(size=4)
    bg = ds.features.mean(axis=0)
    e = explain_kernelshap(m, x, ds, ExplainerConfig("kernelshap"), substream(0))
    np.testing.assert_allclose(e, [f(x[i]) - f(bg[i]) for i, f in enumerate(g)], atol=1e-10)
    # sampled coalitions still satisfy efficiency exactly
    wide = CallableModel(lambda X: np.tanh(X.sum(axis=1)))
    x12 = rng.normal(size=12)
    e12 = explain_kernelshap(wide, x12, None, ExplainerConfig("kernelshap", sample_count=300), substream(4))
    assert abs(e12.sum() - (wide.predict_score(x12) - wide.predict_score(np.zeros(12)))) <= 1e-10


def test_kernelshap_single_feature_and_symmetry():
    m = LinearModel(np.array([2.0]), -0.5)
    x, bg = np.array([1.3]), np.array([0.2])
    e = explain_kernelshap(m, x, None, ExplainerConfig("kernelshap"), background=bg)
    assert e[0] == m.predict_score(x) - m.predict_score(bg)
    sym = CallableModel(lambda X: np.tanh(X[:, 0] * X[:, 1]) + X[:, 2])
    e = explain_kernelshap(sym, np.array([0.7, 0.7, -1.0]), None, ExplainerConfig("kernelshap"),
                           background=np.zeros(3))
    assert abs(e[0] - e[1]) <= 1e-6


def test_random_explainer():
    cfg = ExplainerConfig("random")
    a = explain_random(np.zeros(5), cfg, substream(0, 3))
    assert np.array_equal(a, explain_random(np.zeros(5), cfg, substream(0, 3)))
    draws = np.array([explain_random(np.zeros(3), cfg, substream(1, i)) for i in range(10_000)])
    assert np.all((draws > -1) & (draws < 1))
    assert np.all(np.abs(draws.mean(axis=0)) <= 0.05)


def test_every_explainer_deterministic_and_job_independent(rng):
    X = rng.normal(size=(12, 3))
    ds = make_dataset(X, (X[:, 0] > 0).astype(int))
    m = LinearModel(np.array([1.0, -0.5, 0.2]), 0.1)
    for eid in EXPLAINERS:
        cfg = ExplainerConfig(eid, sample_count=100, seed=5)
        a = explain_dataset(m, ds, cfg, jobs=1)
        b = explain_dataset(m, ds, cfg, jobs=4)
        assert a.shape == (12, 3) and np.all(np.isfinite(a))
        assert np.array_equal(a, b), eid
        single = explain(m, ds, 7, cfg)
        assert np.array_equal(single.importances, a[7]) and single.datapoint_index == 7


def test_config_validation():
    with pytest.raises(ConfigError):
        ExplainerConfig("deeplift")
    with pytest.raises(ConfigError):
        ExplainerConfig("lime", sample_count=0)
    with pytest.raises(ConfigError):
        ExplainerConfig("lime", noise_width=0.0)
    with pytest.raises(ConfigError):
        ExplainerConfig("integrated_gradients", baseline="median")
