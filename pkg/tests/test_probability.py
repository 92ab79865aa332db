import numpy as np
import pytest

from vitac_common.exception import ConfigError, DataValidationError
from vitac_eval.probability import match_probability, probabilities_from_sq_distances


def test_equal_distances_are_uniform():
    p = match_probability(np.zeros(3), np.ones((5, 3)))
    np.testing.assert_allclose(p, np.full(5, 0.2))


def test_two_candidates():
    p = match_probability(np.zeros(1), np.array([[0.0], [10.0]]), c=0.085)
    assert p[0] == pytest.approx(1.0 / (1.0 + np.exp(-8.5)), abs=1e-9)
    assert p[1] == pytest.approx(2.03e-4, rel=1e-2)


def test_sums_to_one():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 30))
        p = match_probability(rng.standard_normal(4), rng.standard_normal((n, 4)) * 5, c=8.5e-2)
        assert abs(p.sum() - 1.0) <= 1e-9


def test_shift_invariance():
    d2 = np.array([0.5, 3.0, 7.25])
    np.testing.assert_allclose(probabilities_from_sq_distances(d2), probabilities_from_sq_distances(d2 + 40.0))


def test_infinite_distance_gets_zero():
    p = probabilities_from_sq_distances(np.array([1.0, np.inf]))
    assert p.tolist() == [1.0, 0.0]


def test_errors():
    with pytest.raises(ConfigError):
        probabilities_from_sq_distances(np.ones(2), c=0.0)
    with pytest.raises(DataValidationError):
        match_probability(np.zeros(2), [])
