from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from upshm.queueing import QueueParams, overload_probability, queue_length_pmf, traffic_intensity


def ctmc_stationary(lam, mu, k):
    """Stationary law of the birth-death chain on 0..k, by solving pi Q = 0 directly."""
    q = np.zeros((k + 1, k + 1))
    for v in range(k):
        q[v, v + 1] = lam
        q[v + 1, v] = mu
    q -= np.diag(q.sum(axis=1))
    a = np.vstack([q.T, np.ones(k + 1)])
    b = np.zeros(k + 2)
    b[-1] = 1.0
    return np.linalg.lstsq(a, b, rcond=None)[0]


@pytest.mark.parametrize("lam,mu,expected", [(30, 30, 1.0), (1, 2, 0.5), (60, 10, 6.0)])
def test_traffic_intensity(lam, mu, expected):
    assert traffic_intensity(lam, mu) == expected


def test_traffic_intensity_zero_mu():
    with pytest.raises(ValueError):
        traffic_intensity(1.0, 0.0)


def test_pmf_uniform_at_rho_one():
    assert queue_length_pmf(1.0, 4).tolist() == [0.2] * 5


@pytest.mark.parametrize("rho,expected", [
    (0.5, [Fraction(4, 7), Fraction(2, 7), Fraction(1, 7)]),
    (2.0, [Fraction(1, 7), Fraction(2, 7), Fraction(4, 7)]),
])
def test_pmf_hand_values(rho, expected):
    np.testing.assert_allclose(queue_length_pmf(rho, 2), [float(f) for f in expected], rtol=0, atol=1e-15)


@pytest.mark.parametrize("rho", [0.1, 0.5, 0.999999, 1.0, 1.000001, 2.0, 6.0])
@pytest.mark.parametrize("k", [1, 5, 50])
def test_pmf_normalizes(rho, k):
    assert abs(queue_length_pmf(rho, k).sum() - 1.0) <= 1e-12


@pytest.mark.parametrize("lam,mu,k", [(1, 2, 3), (30, 25, 20), (10, 40, 12), (60, 10, 8), (7, 7.5, 30)])
def test_pmf_matches_balance_equations(lam, mu, k):
    np.testing.assert_allclose(queue_length_pmf(lam / mu, k), ctmc_stationary(lam, mu, k), atol=1e-10)


@pytest.mark.parametrize("k", [1, 5, 50])
def test_continuity_at_one(k):
    for rho in (1 - 1e-7, 1 + 1e-7):
        assert np.max(np.abs(queue_length_pmf(rho, k) - 1 / (k + 1))) < 1e-5


def test_large_capacity_does_not_overflow():
    pmf = queue_length_pmf(6.0, 1000)
    assert np.all(np.isfinite(pmf))
    assert pmf.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("rho,k", [(0.0, 3), (-1.0, 3), (1.0, 0)])
def test_pmf_domain(rho, k):
    with pytest.raises(ValueError):
        queue_length_pmf(rho, k)


class TestOverloadProbability:
    def test_uniform_tail(self):
        assert overload_probability(QueueParams(5.0, 5.0, 4, 4)) == pytest.approx(0.2, abs=1e-15)

    def test_hand_value(self):
        assert overload_probability(QueueParams(1.0, 2.0, 2, 1)) == pytest.approx(3 / 7, abs=1e-15)

    @given(st.floats(0.05, 8.0), st.integers(1, 60))
    def test_theta_one_is_complement_of_empty(self, rho, k):
        p = QueueParams(rho, 1.0, k, 1)
        assert overload_probability(p) == pytest.approx(1 - queue_length_pmf(rho, k)[0], abs=1e-12)

    def test_monotone_in_rho(self):
        for k, theta in [(10, 3), (100, 85), (100, 95)]:
            vals = [overload_probability(QueueParams(r, 1.0, k, theta)) for r in np.linspace(0.05, 6, 300)]
            assert np.all(np.diff(vals) >= -1e-15)

    @settings(max_examples=50)
    @given(st.floats(0.05, 6.0), st.integers(2, 100))
    def test_monotone_in_theta(self, rho, k):
        vals = [overload_probability(QueueParams(rho, 1.0, k, th)) for th in range(1, k + 1)]
        assert np.all(np.diff(vals) <= 1e-15)
        assert all(0.0 <= v <= 1.0 for v in vals)

    @pytest.mark.parametrize("theta", [0, 5])
    def test_theta_bounds(self, theta):
        with pytest.raises(ValueError):
            QueueParams(1.0, 1.0, 4, theta)
