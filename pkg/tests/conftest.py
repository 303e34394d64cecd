import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scaled_poisson import WeightedPoissonSum, moments


@pytest.fixture(scope="session")
def bench_model():
    """Two classes, weights (1, 10), rates (100, 30): mu=400, k=4/31."""
    return WeightedPoissonSum((1, 10), (Fraction(100), Fraction(30)))


@pytest.fixture(scope="session")
def bench_moments(bench_model):
    return moments(bench_model)


@pytest.fixture(scope="session")
def small_model():
    """Weights (1, 2), rates (1, 1): mu=3, sigma^2=5, k=3/5."""
    return WeightedPoissonSum((1, 2), (Fraction(1), Fraction(1)))


@pytest.fixture(scope="session")
def small_moments(small_model):
    return moments(small_model)
