"""
Tests for the Padé approximation and the rational surrogate.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platoon_synth.exceptions import ConfigurationError, PlantDomainError
from platoon_synth.model import DelayTF, Gains, VehicleParams, exact_magnitude
from platoon_synth.norms import relative_error_profile
from platoon_synth.pade import (
    MAX_PADE_ORDER,
    RationalTF,
    approx_tf,
    freq_response,
    pade_coefficients,
    pade_exp,
)

from tests import reference_data as ref


def _series(num, den, order):
    """Maclaurin coefficients of num/den up to ``order``."""
    num = list(num) + [0.0] * (order + 1)
    den = list(den) + [0.0] * (order + 1)
    q = []
    for k in range(order + 1):
        acc = num[k] - sum(den[j] * q[k - j] for j in range(1, k + 1))
        q.append(acc / den[0])
    return np.array(q)


@pytest.fixture
def params():
    return VehicleParams(theta=ref.SMALL_DELAY, **ref.PLANT)


class TestPadeExp:
    """Tests for pade_exp."""

    @pytest.mark.parametrize("N", [1, 5, 12])
    def test_zero_delay_is_unity(self, N):
        """Test that theta = 0 gives the constant 1."""
        tf = pade_exp(0.0, N)
        assert tf.num == (1.0,)
        assert tf.den == (1.0,)

    def test_first_order_closed_form(self):
        """Test N = 1 against (1 - theta s / 2) / (1 + theta s / 2)."""
        theta = 0.3
        tf = pade_exp(theta, 1)
        assert tf.num == pytest.approx((1.0, -theta / 2))
        assert tf.den == pytest.approx((1.0, theta / 2))

    def test_unit_magnitude(self):
        """Test the all-pass property at a single point."""
        gain = abs(freq_response(pade_exp(0.1, 5), 1.0))
        assert gain == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=1000, deadline=None)
    @given(
        theta=st.floats(0.0, 3.0),
        N=st.integers(1, MAX_PADE_ORDER),
        omega=st.floats(0.0, 100.0),
    )
    def test_all_pass(self, theta, N, omega):
        """Test |P(jw)/Q(jw)| = 1 for random delays, orders and frequencies."""
        value = abs(freq_response(pade_exp(theta, N), omega))
        assert value == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("N", [1, 2, 3, 4, 5])
    def test_series_matching(self, N):
        """Test agreement with exp(-theta s) through order 2N."""
        theta = 2.0
        tf = pade_exp(theta, N)
        series = _series(tf.num, tf.den, 2 * N + 1)
        expected = np.array(
            [(-theta) ** k / math.factorial(k) for k in range(2 * N + 2)]
        )
        np.testing.assert_allclose(
            series[: 2 * N + 1], expected[: 2 * N + 1], atol=1e-12
        )
        assert abs(series[2 * N + 1] - expected[2 * N + 1]) > 1e-9

    def test_coefficients_match_factorials(self):
        """Test the recurrence against the factorial formula."""
        N = 6
        c = pade_coefficients(N)
        expected = [
            math.factorial(2 * N - k)
            * math.factorial(N)
            / (math.factorial(2 * N) * math.factorial(k) * math.factorial(N - k))
            for k in range(N + 1)
        ]
        np.testing.assert_allclose(c, expected, rtol=1e-14)

    @pytest.mark.parametrize("N", [0, 13, -1, 2.5, True])
    def test_invalid_order(self, N):
        """Test that orders outside 1..12 are configuration errors."""
        with pytest.raises(ConfigurationError):
            pade_exp(0.1, N)

    def test_negative_delay(self):
        """Test that a negative delay is rejected."""
        with pytest.raises(ConfigurationError):
            pade_exp(-0.1, 5)


class TestApproxTF:
    """Tests for approx_tf."""

    def test_degrees(self, params):
        """Test deg den = 3 + N and strict properness."""
        tf = approx_tf(DelayTF.from_gains(params, Gains.from_sequence(ref.K_UNC)), 5)
        assert len(tf.den) == 3 + 5 + 1
        assert tf.strictly_proper

    def test_delay_free_matches_exact(self):
        """Test that theta = 0 reproduces the exact magnitude."""
        p = VehicleParams(**ref.PLANT)
        tf = DelayTF.from_gains(p, Gains.from_sequence(ref.K_UNC))
        omega = np.geomspace(1e-2, 1e2, 100)
        np.testing.assert_allclose(
            approx_tf(tf).magnitude(omega), exact_magnitude(tf, omega), rtol=1e-10
        )

    def test_no_feedforward_matches_exact(self, params):
        """Test that k4 = 0 reproduces the exact magnitude."""
        tf = DelayTF.from_gains(params, Gains(0.5, 0.2, 0.0, 0.0))
        omega = np.geomspace(1e-2, 1e2, 100)
        np.testing.assert_allclose(
            approx_tf(tf).magnitude(omega), exact_magnitude(tf, omega), rtol=1e-12
        )

    def test_dc_gain(self, params):
        """Test F_hat(0) = 1."""
        tf = approx_tf(DelayTF.from_gains(params, Gains.from_sequence(ref.K_UNC)))
        assert freq_response(tf, 0.0) == pytest.approx(1.0 + 0j, abs=1e-15)

    @pytest.mark.parametrize("gains", [ref.K_UNC, ref.K_STAR_1])
    def test_more_accurate_than_taylor(self, params, gains):
        """Test that the Padé error on [0.01, 5.01] is below the Taylor error."""
        from platoon_synth.model import taylor_magnitude

        tf = DelayTF.from_gains(params, Gains.from_sequence(gains))
        exact = lambda w: exact_magnitude(tf, w)  # noqa: E731
        pade = relative_error_profile(exact, approx_tf(tf, 5).magnitude)
        taylor = relative_error_profile(exact, lambda w: taylor_magnitude(tf, w))
        assert pade.max_abs < taylor.max_abs
        assert pade.max_abs < 0.5

    @pytest.mark.parametrize("gains", [ref.K_UNC, ref.K_STAR_1])
    def test_error_decreases_with_order(self, params, gains):
        """Test that the band error does not grow with N."""
        tf = DelayTF.from_gains(params, Gains.from_sequence(gains))
        errors = [
            relative_error_profile(
                lambda w: exact_magnitude(tf, w), approx_tf(tf, N).magnitude
            ).max_abs
            for N in range(1, 6)
        ]
        for lower, higher in zip(errors[1:], errors[:-1]):
            assert lower <= higher + 1e-10


class TestFreqResponse:
    """Tests for freq_response and RationalTF."""

    def test_constant(self):
        """Test a constant transfer function."""
        assert freq_response(RationalTF(num=(2.0,), den=(1.0,)), 3.0) == 2 + 0j

    def test_all_pass_at_three(self):
        """Test the approximant magnitude at w = 3."""
        gain = abs(freq_response(pade_exp(0.1, 5), 3.0))
        assert gain == pytest.approx(1.0, abs=1e-12)

    def test_vectorized(self):
        """Test that array input returns an array."""
        values = freq_response(pade_exp(0.1, 5), np.array([0.0, 1.0, 2.0]))
        assert values.shape == (3,)

    def test_pole_on_axis(self):
        """Test that an imaginary-axis pole is a domain error."""
        with pytest.raises(PlantDomainError):
            freq_response(RationalTF(num=(1.0,), den=(0.0, 1.0)), 0.0)

    def test_improper_rejected(self):
        """Test that deg num > deg den is rejected."""
        with pytest.raises(ConfigurationError):
            RationalTF(num=(1.0, 1.0), den=(1.0,))

    def test_dict_round_trip(self):
        """Test dictionary round trip."""
        tf = pade_exp(0.2, 3)
        assert RationalTF.from_dict(tf.to_dict()) == tf
