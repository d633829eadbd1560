import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, strategies as st

from edgelab.stats import LEVELS, compare_samples, ks_coefficient, ks_critical_value, ks_two_sample, moments


def test_identical_and_disjoint():
    x = np.linspace(0, 1, 50)
    assert ks_two_sample(x, x).statistic == 0.0
    assert ks_two_sample(x, x + 2.0).statistic == 1.0
    with pytest.raises(ValueError):
        ks_two_sample([], x)


def test_coefficients():
    # c(0.05) = 1.358, c(0.01) = 1.628 in the usual tables
    assert ks_coefficient(0.05) == pytest.approx(1.3581, abs=1e-4)
    assert ks_coefficient(0.01) == pytest.approx(1.6276, abs=1e-4)
    assert ks_critical_value(100, 100, 0.05) == pytest.approx(1.3581 * math.sqrt(0.02), abs=1e-4)
    assert [ks_coefficient(a) for a in LEVELS] == sorted(ks_coefficient(a) for a in LEVELS)


def test_statistic_matches_brute_force(rng):
    A = rng.normal(size=37)
    B = rng.normal(0.3, 1.2, size=53)
    grid = np.concatenate([A, B])
    Fa = (A[None, :] <= grid[:, None]).mean(axis=1)
    Fb = (B[None, :] <= grid[:, None]).mean(axis=1)
    assert ks_two_sample(A, B).statistic == pytest.approx(np.abs(Fa - Fb).max(), abs=1e-15)


def test_null_rejection_rate(rng):
    """Under the null, rejection at level 0.05 happens about 5% of the time."""
    rej = [ks_two_sample(rng.normal(size=300), rng.normal(size=400)).rejects(0.05) for _ in range(600)]
    assert 0.02 < np.mean(rej) < 0.08


def test_detects_shift(rng):
    r = ks_two_sample(rng.normal(size=2000), rng.normal(0.35, 1, size=2000))
    assert r.rejects(0.001)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30), st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30))
def test_ks_symmetric_and_bounded(a, b):
    s1 = ks_two_sample(a, b).statistic
    assert 0.0 <= s1 <= 1.0
    assert s1 == pytest.approx(ks_two_sample(b, a).statistic)


def test_moments_and_comparison(rng):
    x = rng.normal(1.0, 2.0, size=5000)
    m = moments(x)
    assert m["mean"] == pytest.approx(1.0, abs=0.1)
    assert m["var"] == pytest.approx(4.0, rel=0.05)
    assert m["skew"] == pytest.approx(scipy.stats.skew(x))
    assert m["sem"] == pytest.approx(2.0 / math.sqrt(5000), rel=0.05)
    c = compare_samples(x, x + 0.5)
    assert c["mean_diff"] == pytest.approx(-0.5)
    assert c["var_diff"] == pytest.approx(0.0, abs=1e-9)
