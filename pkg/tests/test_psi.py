import math

import numpy as np
import pytest

from multivariance.psi import (ConfigurationError, PsiSpec, pairwise_psi, parse_psi,
                               parse_psi_list, psi_eval)

from conftest import FAMILIES


def test_examples():
    assert psi_eval(PsiSpec("euclid_power", 1.0), [3, 4]) == 5.0
    assert psi_eval(PsiSpec("bounded_exp", 1.0, 1.0), [0, 0]) == 0.0
    assert psi_eval(PsiSpec("bounded_exp", 1.0, 1.0), [1.0]) == pytest.approx(1 - math.exp(-1), abs=1e-15)
    assert psi_eval(PsiSpec("log_type"), [1.0]) == pytest.approx(math.log(1.5), abs=1e-15)


@pytest.mark.parametrize("spec", [
    ("euclid_power", 0.0, 1.0), ("euclid_power", 2.5, 1.0), ("bounded_exp", 2.0, 1.0),
    ("bounded_exp", 1.0, 0.0), ("bounded_exp", 1.0, -1.0), ("cosine", 1.0, 1.0),
])
def test_invalid_parameters(spec):
    with pytest.raises(ConfigurationError):
        PsiSpec(*spec)


def test_alpha_two_flagged():
    assert not PsiSpec("euclid_power", 2.0).characterizing
    assert PsiSpec("euclid_power", 1.999).characterizing
    assert PsiSpec("log_type").characterizing


@pytest.mark.parametrize("spec", FAMILIES)
def test_zero_and_symmetry(spec, rng):
    assert psi_eval(spec, np.zeros(3)) == 0.0
    for _ in range(50):
        y = rng.normal(size=rng.integers(1, 4)) * 5
        assert psi_eval(spec, y) == psi_eval(spec, -y)
        assert psi_eval(spec, y) >= 0


def test_bounded_range(rng):
    spec = PsiSpec("bounded_exp", 1.2, 3.0)
    # moderate arguments: for huge |y| the value rounds to 1.0 in double precision
    vals = [psi_eval(spec, rng.normal(size=2)) for _ in range(200)]
    assert 0 <= min(vals) and max(vals) < 1


@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.5, 2.0])
def test_homogeneity(alpha, rng):
    spec = PsiSpec("euclid_power", alpha)
    for _ in range(50):
        y, r = rng.normal(size=3), rng.uniform(-4, 4)
        assert psi_eval(spec, r * y) == pytest.approx(abs(r) ** alpha * psi_eval(spec, y), rel=1e-12)


@pytest.mark.parametrize("spec", FAMILIES)
def test_pairwise_matches_pointwise(spec, rng):
    x = rng.normal(size=(7, 3))
    b = pairwise_psi(spec, x)
    ref = np.array([[psi_eval(spec, x[j] - x[k]) for k in range(7)] for j in range(7)])
    assert np.allclose(b, ref, rtol=1e-13, atol=1e-15)
    assert np.all(np.diag(b) == 0)


def test_parse():
    assert parse_psi("euclid:1.0") == PsiSpec("euclid_power", 1.0)
    assert parse_psi("euclid") == PsiSpec("euclid_power", 1.0)
    assert parse_psi("expbnd:1.0:0.5") == PsiSpec("bounded_exp", 1.0, 0.5)
    assert parse_psi("log") == PsiSpec("log_type")
    for bad in ("euclid:x", "log:1", "foo", "expbnd:1:2:3", "euclid:3"):
        with pytest.raises(ConfigurationError):
            parse_psi(bad)
    assert str(parse_psi("expbnd:1.5:2")) == "expbnd:1.5:2"


def test_parse_list():
    assert parse_psi_list("log", 3) == [PsiSpec("log_type")] * 3
    assert parse_psi_list("euclid:1,log", 2)[1] == PsiSpec("log_type")
    with pytest.raises(ConfigurationError):
        parse_psi_list("euclid:1,log", 3)
