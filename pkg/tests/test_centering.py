import numpy as np
import pytest

from multivariance.centering import (CenteredMatrix, DataError, Dataset, MatrixCache,
                                     distance_matrix, double_center, scale_matrix)
from multivariance.psi import PsiSpec

from conftest import FAMILIES

E1 = PsiSpec("euclid_power", 1.0)


def _cbc(b):
    n = b.shape[0]
    c = np.eye(n) - np.ones((n, n)) / n
    return -c @ b @ c


def test_distance_matrix_examples():
    d = Dataset(np.array([[0.0], [1.0], [3.0]]))
    assert np.array_equal(distance_matrix(d, 0, E1), [[0, 1, 3], [1, 0, 2], [3, 2, 0]])
    d = Dataset(np.array([[2.0, 0.0], [2.0, 3.0], [2.0, 4.0]]))
    for spec in FAMILIES:
        assert np.array_equal(distance_matrix(d, 0, spec), np.zeros((3, 3)))
    d = Dataset(np.array([[0.0, 0.0], [3.0, 4.0]]), [(0, 2)])
    assert np.array_equal(distance_matrix(d, 0, E1), [[0, 5], [5, 0]])


def test_double_center_examples():
    a = double_center(np.array([[0, 2.5], [2.5, 0]])).entries
    assert np.allclose(a, [[1.25, -1.25], [-1.25, 1.25]], atol=1e-15)
    a = double_center(np.array([[0, 1, 3], [1, 0, 2], [3, 2, 0.0]])).entries
    ref = np.array([[4, 0, -4], [0, 2, -2], [-4, -2, 6]]) / 3
    assert np.allclose(a, ref, atol=1e-15)
    assert np.array_equal(double_center(np.zeros((4, 4))).entries, np.zeros((4, 4)))


def test_double_center_matches_product(rng):
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 51))
        x = rng.normal(size=(n, 2))
        b = distance_matrix(Dataset(x, [(0, 2)]), 0, FAMILIES[rng.integers(len(FAMILIES))])
        a = double_center(b).entries
        worst = max(worst, np.abs(a - _cbc(b)).max())
        assert np.allclose(a, a.T, atol=1e-12)
        tol = 1e-9 * n * max(np.abs(a).max(), 1e-300)
        assert np.abs(a.sum(axis=0)).max() <= tol and np.abs(a.sum(axis=1)).max() <= tol
    assert worst <= 1e-12


def test_scale_examples():
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    a = double_center(b)
    assert np.allclose(a.entries, [[0.5, -0.5], [-0.5, 0.5]])
    s = scale_matrix(a, b, "normalized")
    assert np.allclose(s.entries, [[1, -1], [-1, 1]]) and not s.degenerate
    z = np.zeros((3, 3))
    for variant, n in (("normalized", None), ("r_scaled", 3), ("mcor_scaled", 3)):
        s = scale_matrix(double_center(z), z, variant, n)
        assert s.degenerate and np.array_equal(s.entries, z)


def test_even_n_scalings_coincide(rng):
    for n in (2, 4, 6):
        b = distance_matrix(Dataset(rng.normal(size=(12, 1))), 0, E1)
        a = double_center(b)
        r = scale_matrix(a, b, "r_scaled", n).entries
        m = scale_matrix(a, b, "mcor_scaled", n).entries
        assert np.allclose(r, m, rtol=1e-14, atol=0)


def test_odd_n_signed_root():
    # a matrix whose cubed entries average to a negative number
    b = np.array([[0, 1, 1, 5], [1, 0, 1, 5], [1, 1, 0, 5], [5, 5, 5, 0.0]])
    a = double_center(b)
    m3 = np.mean(a.entries ** 3)
    s = scale_matrix(a, b, "mcor_scaled", 3)
    if m3 < 0:
        assert s.flags
    assert np.allclose(s.entries * np.sign(m3) * abs(m3) ** (1 / 3), a.entries)
    with pytest.raises(ValueError):
        scale_matrix(a, b, "r_scaled", 1)


def test_translation_reflection_rotation(rng):
    x = rng.normal(size=(20, 2))
    theta = 0.7
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    base = double_center(distance_matrix(Dataset(x, [(0, 2)]), 0, E1)).entries
    for y in (x + np.array([3.0, -7.0]), -x, x @ rot.T):
        a = double_center(distance_matrix(Dataset(y, [(0, 2)]), 0, E1)).entries
        assert np.abs(a - base).max() <= 1e-12


def test_homogeneity_of_raw_matrix(rng):
    x = rng.normal(size=(15, 1))
    for alpha in (0.5, 1.0, 1.5):
        spec = PsiSpec("euclid_power", alpha)
        a = double_center(distance_matrix(Dataset(x), 0, spec)).entries
        a3 = double_center(distance_matrix(Dataset(-3 * x), 0, spec)).entries
        assert np.allclose(a3, 3 ** alpha * a, rtol=1e-12, atol=1e-12)


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.ones((1, 2)))
    with pytest.raises(DataError):
        Dataset(np.array([[1.0, np.nan], [1.0, 2.0]]))
    with pytest.raises(DataError):
        Dataset(np.ones((3, 3)), [(0, 2), (1, 3)])
    with pytest.raises(DataError):
        Dataset(np.ones((3, 3)), [(0, 2)])
    d = Dataset.from_blocks([np.ones(4), np.ones((4, 2))], ["a", "b"])
    assert d.dims == [1, 2] and d.n == 2 and d.N == 4


def test_cache_reuses_matrices(rng):
    d = Dataset(rng.normal(size=(10, 3)))
    cache = MatrixCache(d, [E1, FAMILIES[3], FAMILIES[5]])
    assert cache.get(1) is cache.get(1)
    assert cache.get((0, 2), "raw").N == 10
    joint = cache.distance((2, 0))
    ref = distance_matrix(Dataset(d.values[:, [0, 2]], [(0, 2)]), 0, E1)
    assert np.allclose(joint, ref)
    assert isinstance(cache.get(0, "r_scaled", 3), CenteredMatrix)
