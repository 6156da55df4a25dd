import numpy as np
import pytest

from multivariance.centering import Dataset
from multivariance.psi import PsiSpec

FAMILIES = [
    PsiSpec("euclid_power", 1.0),
    PsiSpec("euclid_power", 0.5),
    PsiSpec("euclid_power", 1.7),
    PsiSpec("bounded_exp", 1.0, 0.7),
    PsiSpec("bounded_exp", 1.5, 2.0),
    PsiSpec("log_type"),
]


def random_dataset(rng, N, n, max_dim=3):
    dims = rng.integers(1, max_dim + 1, size=n)
    blocks = [rng.normal(size=(N, d)) * rng.uniform(0.5, 3.0) for d in dims]
    return Dataset.from_blocks(blocks)


def random_psis(rng, n):
    return [FAMILIES[i] for i in rng.integers(0, len(FAMILIES), size=n)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
