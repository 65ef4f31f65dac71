"""First-order prediction formulas: values, homogeneity, monotonicity."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixdetect.theory import (
    flat_prior_prediction,
    integrated_risk_prediction,
    ms_delay_prediction,
    msr_delay_prediction,
)


class TestMsDelay:
    def test_substitution(self):
        assert ms_delay_prediction(math.exp(10), 0.5, 0.0, 1.0) == pytest.approx(20.0)

    def test_mu_equal_info_halves(self):
        i = 0.8
        full = ms_delay_prediction(math.e**6, i, 0.0, 1.0)
        half = ms_delay_prediction(math.e**6, i, i, 1.0)
        assert half == pytest.approx(full / 2.0, rel=1e-12)

    def test_unit_case(self):
        assert ms_delay_prediction(math.e, 0.4, 0.6, 2.0) == pytest.approx(1.0)


class TestMsrDelay:
    def test_substitution(self):
        assert msr_delay_prediction(math.exp(10), 0.5, 1.0) == pytest.approx(20.0)

    def test_equals_ms_at_zero_mu(self):
        a, i, m = 123.0, 0.7, 2.0
        assert msr_delay_prediction(a, i, m) == ms_delay_prediction(a, i, 0.0, m)

    def test_second_moment_is_square(self):
        a, i = 55.0, 0.3
        assert msr_delay_prediction(a, i, 2.0) == pytest.approx(
            msr_delay_prediction(a, i, 1.0) ** 2, rel=1e-14
        )


class TestIntegratedRisk:
    def test_substitution(self):
        c = math.exp(-10)
        assert integrated_risk_prediction(c, 1.0, 2.0) == pytest.approx(2.0 * c * 10.0)

    def test_order_scaling(self):
        c, d = 1e-3, 1.4
        assert integrated_risk_prediction(c, 2.0, d) == pytest.approx(
            integrated_risk_prediction(c, 1.0, d) * abs(math.log(c)), rel=1e-12
        )

    def test_vanishes_at_unit_cost(self):
        assert integrated_risk_prediction(1 - 1e-12, 1.0, 2.0) == pytest.approx(
            0.0, abs=1e-9
        )


class TestFlatPrior:
    def test_substitution(self):
        assert flat_prior_prediction(math.exp(-10), 1.0, 1.0) == pytest.approx(10.0)

    def test_matches_ms_with_inverse_alpha_threshold(self):
        alpha, i = 1e-4, 0.6
        # A = 1/alpha differs from (1-alpha)/alpha by log(1-alpha) = O(alpha)
        lhs = flat_prior_prediction(alpha, i, 1.0)
        rhs = ms_delay_prediction((1 - alpha) / alpha, i, 0.0, 1.0)
        assert lhs == pytest.approx(rhs, rel=2 * alpha)

    def test_cube(self):
        alpha, i = 1e-3, 0.9
        assert flat_prior_prediction(alpha, i, 3.0) == pytest.approx(
            flat_prior_prediction(alpha, i, 1.0) ** 3, rel=1e-14
        )


@settings(max_examples=60, deadline=None)
@given(
    log_a=st.floats(0.1, 40.0),
    i=st.floats(0.01, 10.0),
    mu=st.floats(0.0, 5.0),
    m=st.sampled_from([1.0, 2.0, 3.0]),
)
def test_homogeneity_exact(log_a, i, mu, m):
    a = math.exp(log_a)
    assert ms_delay_prediction(a, i, mu, m) == ms_delay_prediction(a, i, mu, 1.0) ** m
    assert msr_delay_prediction(a, i, m) == msr_delay_prediction(a, i, 1.0) ** m


@settings(max_examples=60, deadline=None)
@given(
    log_a=st.floats(0.5, 30.0),
    i=st.floats(0.05, 5.0),
    mu=st.floats(0.0, 3.0),
)
def test_monotonicity(log_a, i, mu):
    a = math.exp(log_a)
    assert ms_delay_prediction(a * 2.0, i, mu) > ms_delay_prediction(a, i, mu)
    assert ms_delay_prediction(a, i * 1.5, mu) < ms_delay_prediction(a, i, mu)
    assert ms_delay_prediction(a, i, mu + 0.5) < ms_delay_prediction(a, i, mu)


def test_domain_errors():
    with pytest.raises(ValueError):
        ms_delay_prediction(0.5, 1.0)
    with pytest.raises(ValueError):
        ms_delay_prediction(10.0, -1.0)
    with pytest.raises(ValueError):
        msr_delay_prediction(10.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        integrated_risk_prediction(1.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        flat_prior_prediction(0.0, 1.0)
