"""Shared builders for the test suite."""

import numpy as np
import pytest

from cholband.factors import CholeskyFactors, Dataset


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_factors(gen: np.random.Generator, p: int) -> CholeskyFactors:
    rows = tuple(gen.uniform(-0.9, 0.9, size=i) for i in range(p))
    variances = gen.uniform(0.5, 2.0, size=p)
    return CholeskyFactors(rows=rows, variances=variances)


def random_banded_factors(gen: np.random.Generator, p: int) -> CholeskyFactors:
    rows = []
    for i in range(p):
        row = np.zeros(i)
        if i:
            k = int(gen.integers(0, i + 1))
            if k:
                row[i - k:] = gen.uniform(0.2, 0.9, size=k) * gen.choice([-1.0, 1.0], size=k)
        rows.append(row)
    variances = gen.uniform(0.5, 2.0, size=p)
    return CholeskyFactors(rows=tuple(rows), variances=variances)


def random_spd(gen: np.random.Generator, p: int) -> np.ndarray:
    a = gen.normal(size=(p, p))
    sigma = a @ a.T / p + 0.5 * np.eye(p)
    return (sigma + sigma.T) / 2.0


def centered_dataset(gen: np.random.Generator, n: int, p: int) -> Dataset:
    values = gen.normal(size=(n, p))
    values = values - values.mean(axis=0)
    return Dataset(values=values, centered=True, column_means=np.zeros(p))


@pytest.fixture
def gen():
    return rng(12345)
