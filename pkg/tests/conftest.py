import numpy as np
import pytest

from axe_eval.core import Dataset
from axe_eval.experiments.synthetic import FourGaussianSpec, four_gaussian_data


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_gaussians():
    """Four-Gaussian data at 250 points per cluster, with cluster ids."""
    return four_gaussian_data(FourGaussianSpec(points_per_cluster=250, seed=3))


@pytest.fixture(scope="session")
def full_gaussians():
    return four_gaussian_data(FourGaussianSpec())


def make_dataset(X, labels=None, names=None):
    X = np.asarray(X, dtype=float)
    names = names or tuple(f"x{j}" for j in range(X.shape[1]))
    return Dataset(X, names, labels)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
