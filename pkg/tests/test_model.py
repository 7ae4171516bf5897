"""
Tests for the vehicle model and the analytic stability conditions.
"""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from platoon_synth.exceptions import ConfigurationError, PlantDomainError
from platoon_synth.model import (
    DelayTF,
    Gains,
    StabilityReport,
    VehicleParams,
    build_state_space,
    characteristic_polynomial,
    cubic_roots,
    exact_magnitude,
    lemma1_eta,
    local_stability,
    taylor_magnitude,
    taylor_string_stability,
    zero_frequency_derivatives,
)
from platoon_synth.pade import approx_tf

from tests import reference_data as ref


@pytest.fixture
def params():
    """Plant with the small communication delay."""
    return VehicleParams(theta=ref.SMALL_DELAY, **ref.PLANT)


@pytest.fixture
def k_unc():
    return Gains.from_sequence(ref.K_UNC)


class TestVehicleParams:
    """Tests for VehicleParams validation."""

    def test_valid_params(self, params):
        """Test that the reference plant is accepted."""
        assert params.T == 0.45
        assert params.theta == 0.1

    @pytest.mark.parametrize(
        "overrides",
        [{"T": 0.0}, {"K": -1.0}, {"tau": -0.5}, {"theta": -0.1}, {"T": math.nan}],
    )
    def test_invalid_params(self, overrides):
        """Test that invalid constants raise ConfigurationError."""
        values = dict(ref.PLANT, theta=0.1)
        values.update(overrides)
        with pytest.raises(ConfigurationError):
            VehicleParams(**values)

    def test_round_trip(self, params):
        """Test dictionary round trip."""
        assert VehicleParams.from_dict(params.to_dict()) == params

    def test_with_delay(self, params):
        """Test that with_delay only changes theta."""
        other = params.with_delay(1.5)
        assert other.theta == 1.5
        assert (other.tau, other.T, other.K) == (params.tau, params.T, params.K)


class TestGains:
    """Tests for the Gains container."""

    def test_from_sequence(self):
        """Test construction from a list."""
        k = Gains.from_sequence(ref.K_UNC)
        assert k.as_list() == ref.K_UNC
        np.testing.assert_array_equal(k.as_array(), np.array(ref.K_UNC))

    def test_from_sequence_wrong_length(self):
        """Test that three values are rejected."""
        with pytest.raises(ConfigurationError):
            Gains.from_sequence([1.0, 2.0, 3.0])

    def test_dict_round_trip(self, k_unc):
        """Test dictionary round trip."""
        assert Gains.from_dict(k_unc.to_dict()) == k_unc


class TestStateSpace:
    """Tests for build_state_space."""

    def test_reference_plant(self, params):
        """Test the matrices of the reference plant."""
        ss = build_state_space(params)
        np.testing.assert_allclose(ss.A[2], [0.0, 0.0, -1.0 / 0.45])
        np.testing.assert_allclose(ss.B, [0.0, 0.0, 1.0 / 0.45])
        np.testing.assert_array_equal(ss.D, [0.0, 1.0, 0.0])
        assert ss.A[0, 2] == -1.0

    def test_zero_time_gap(self):
        """Test that tau = 0 removes the spacing-acceleration coupling."""
        ss = build_state_space(VehicleParams(tau=0.0, T=0.45, K=1.0))
        assert ss.A[0, 2] == 0.0

    def test_closed_loop_eigenvalues_match_cubic(self, params, k_unc):
        """Test that A + Bk has the roots of the characteristic cubic."""
        closed = build_state_space(params).closed_loop(k_unc)
        eig = sorted(np.linalg.eigvals(closed), key=lambda z: (z.real, z.imag))
        roots = cubic_roots(characteristic_polynomial(params, k_unc))
        np.testing.assert_allclose(eig, roots, atol=1e-10)

    def test_closed_loop_ignores_feedforward(self, params, k_unc):
        """Test that k4 does not move the poles."""
        ss = build_state_space(params)
        other = Gains(k_unc.k1, k_unc.k2, k_unc.k3, -5.0)
        np.testing.assert_array_equal(ss.closed_loop(k_unc), ss.closed_loop(other))


class TestLocalStability:
    """Tests for local_stability."""

    def test_unconstrained_design_is_stable(self, params, k_unc):
        """Test the margins of the unconstrained design."""
        report = local_stability(params, k_unc)
        assert report.hurwitz
        np.testing.assert_allclose(
            report.margins, [0.92, 2.24, 1.92, 3.8868], atol=1e-9
        )
        assert report.spectral_abscissa < 0

    def test_zero_spacing_gain(self, params):
        """Test that k1 = 0 is not locally stable."""
        report = local_stability(params, Gains(0.0, 1.0, 0.0, 0.0))
        assert report.margins[0] == 0.0
        assert not report.hurwitz

    def test_large_delay_design_is_stable(self):
        """Test the Hurwitz property of the large-delay design."""
        p = VehicleParams(theta=ref.LARGE_DELAY, **ref.PLANT)
        assert local_stability(p, Gains.from_sequence(ref.K_STAR_2)).hurwitz

    def test_default_hdv_margins(self, params):
        """Test the margins of the default human-driven gains."""
        report = local_stability(params, Gains.from_sequence(ref.K_HDV))
        np.testing.assert_allclose(report.margins, ref.K_HDV_MARGINS, atol=1e-12)
        assert report.hurwitz

    def test_report_round_trip(self, params, k_unc):
        """Test StabilityReport dictionary round trip."""
        report = local_stability(params, k_unc)
        restored = StabilityReport.from_dict(report.to_dict())
        assert restored.hurwitz == report.hurwitz
        np.testing.assert_allclose(restored.eigenvalues, report.eigenvalues)

    @settings(max_examples=500, deadline=None)
    @given(
        k=st.lists(
            st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False),
            min_size=4,
            max_size=4,
        ),
        tau=st.floats(0.0, 2.0),
        T=st.floats(0.05, 2.0),
        K=st.floats(0.2, 2.0),
    )
    def test_margins_match_eigenvalues(self, k, tau, T, K):
        """Test that the Hurwitz inequalities agree with the root locations."""
        p = VehicleParams(tau=tau, T=T, K=K)
        report = local_stability(p, Gains.from_sequence(k))
        assume(abs(report.spectral_abscissa) > 1e-9)
        assume(all(abs(m) > 1e-9 for m in report.margins))
        assert report.hurwitz == (report.spectral_abscissa < 0)


class TestCubicRoots:
    """Tests for the two cubic solvers."""

    @pytest.mark.parametrize(
        "coefficients",
        [
            (1.0, -6.0, 11.0, -6.0),
            (0.45, 1.92, 2.24, 0.92),
            (2.0, 0.0, 0.0, -2.0),
            (1.0, 2.0, 2.0, 1.0),
        ],
    )
    def test_closed_form_matches_companion(self, coefficients):
        """Test that both methods give the same roots."""
        companion = cubic_roots(coefficients)
        closed = cubic_roots(coefficients, method="closed_form")
        np.testing.assert_allclose(companion, closed, atol=1e-9)

    def test_known_roots(self):
        """Test (s-1)(s-2)(s-3)."""
        roots = cubic_roots((1.0, -6.0, 11.0, -6.0), method="closed_form")
        np.testing.assert_allclose([r.real for r in roots], [1.0, 2.0, 3.0], atol=1e-10)

    def test_fallback_on_solver_failure(self, monkeypatch):
        """Test that a LinAlgError falls back to the closed form."""

        def broken(_):
            raise np.linalg.LinAlgError("no convergence")

        monkeypatch.setattr(np.linalg, "eigvals", broken)
        roots = cubic_roots((1.0, -6.0, 11.0, -6.0))
        np.testing.assert_allclose([r.real for r in roots], [1.0, 2.0, 3.0], atol=1e-10)

    def test_unknown_method(self):
        """Test that an unknown method is a configuration error."""
        with pytest.raises(ConfigurationError):
            cubic_roots((1.0, 0.0, 0.0, 1.0), method="bisection")


class TestMagnitude:
    """Tests for exact_magnitude and taylor_magnitude."""

    def test_matches_direct_evaluation(self, params, k_unc):
        """Test the closed form against complex evaluation on a log grid."""
        tf = DelayTF.from_gains(params, k_unc)
        omega = np.geomspace(1e-3, 1e3, 200)
        direct = np.array([abs(tf.evaluate(1j * w)) for w in omega])
        np.testing.assert_allclose(exact_magnitude(tf, omega), direct, rtol=1e-11)

    def test_scalar_input(self, params, k_unc):
        """Test that scalar input returns a float."""
        tf = DelayTF.from_gains(params, k_unc)
        value = exact_magnitude(tf, 2.5)
        assert isinstance(value, float)
        assert value == pytest.approx(abs(tf.evaluate(2.5j)), rel=1e-12)

    def test_zero_frequency_limit(self, params, k_unc):
        """Test |F| -> 1 and slope -> 0 near zero frequency."""
        tf = DelayTF.from_gains(params, k_unc)
        assert abs(exact_magnitude(tf, 1e-6) - 1.0) < 1e-6
        h = 1e-6
        upper, lower = exact_magnitude(tf, 1e-4 + h), exact_magnitude(tf, 1e-4 - h)
        slope = (upper - lower) / (2 * h)
        assert abs(slope) < 1e-3

    def test_no_feedforward_is_delay_independent(self, params):
        """Test that k4 = 0 removes the delay from the magnitude."""
        k = Gains(0.5, 0.2, 0.0, 0.0)
        omega = np.linspace(0.01, 5.0, 50)
        a = exact_magnitude(DelayTF.from_gains(params, k), omega)
        b = exact_magnitude(DelayTF.from_gains(params.with_delay(3.0), k), omega)
        np.testing.assert_allclose(a, b, rtol=1e-14)

    def test_taylor_exact_without_delay(self, k_unc):
        """Test that the Taylor magnitude is exact at theta = 0."""
        tf = DelayTF.from_gains(VehicleParams(**ref.PLANT), k_unc)
        omega = np.linspace(0.01, 5.01, 100)
        np.testing.assert_allclose(
            taylor_magnitude(tf, omega), exact_magnitude(tf, omega)
        )

    def test_taylor_exact_without_feedforward(self, params):
        """Test that the Taylor magnitude is exact when k4 = 0."""
        tf = DelayTF.from_gains(params, Gains(0.5, 0.2, 0.0, 0.0))
        omega = np.linspace(0.01, 5.01, 100)
        np.testing.assert_allclose(
            taylor_magnitude(tf, omega), exact_magnitude(tf, omega)
        )

    def test_taylor_error_exceeds_pade_error(self, params, k_unc):
        """Test that the Taylor error is larger than the Padé error at w = 5."""
        tf = DelayTF.from_gains(params, k_unc)
        exact = exact_magnitude(tf, 5.0)
        taylor_error = abs(taylor_magnitude(tf, 5.0) - exact) / exact
        pade_error = abs(approx_tf(tf, 5).magnitude(5.0) - exact) / exact
        assert taylor_error > 0
        assert taylor_error > pade_error

    def test_degenerate_denominator(self, params):
        """Test that a pole on the imaginary axis is a domain error."""
        # k1 = 0 puts a pole at s = 0
        tf = DelayTF.from_gains(params, Gains(0.0, 1.0, 0.0, 0.0))
        with pytest.raises(PlantDomainError):
            exact_magnitude(tf, np.array([0.0, 1.0]))

    def test_magnitude_coefficients(self, params, k_unc):
        """Test that the constant terms of N and D coincide."""
        c = DelayTF.from_gains(params, k_unc).magnitude_coefficients()
        assert c["n0"] == c["d0"] == pytest.approx(0.92**2)
        assert c["d6"] == pytest.approx(0.45**2)


class TestTaylorConditions:
    """Tests for taylor_string_stability."""

    def test_delay_free_hdv(self):
        """Test p, q and r for the delay-free human-driven gains."""
        p = VehicleParams(**ref.PLANT)
        cond = taylor_string_stability(p, Gains.from_sequence(ref.K_HDV))
        assert cond.p == pytest.approx(0.2025)
        assert cond.q == pytest.approx(0.37)
        assert cond.r == pytest.approx(-0.55)
        assert not cond.certified

    def test_unconstrained_design_certified(self, params, k_unc):
        """Test that the small-delay design passes the Taylor check."""
        assert taylor_string_stability(params, k_unc).certified

    def test_negative_leading_coefficient(self):
        """Test that a large delay with k4 k2 < 0 fails both cases."""
        p = VehicleParams(tau=1.0, T=0.45, K=1.0, theta=2.0)
        cond = taylor_string_stability(p, Gains(0.5, -1.0, 0.0, 1.0))
        assert cond.p < 0
        assert not cond.case1_ok
        assert not cond.case2_ok


class TestCurvatureEta:
    """Tests for lemma1_eta and the zero-frequency derivatives."""

    def test_optimized_design_on_boundary(self, params):
        """Test that the optimized small-delay design has eta close to zero."""
        assert abs(lemma1_eta(params, Gains.from_sequence(ref.K_STAR_1))) < 1e-3

    def test_algebraic_zero(self, params):
        """Test eta = 0 when the bracket equals 1/K."""
        # k4 + k3 + tau k2 + tau^2 k1 / 2 = 1
        k = Gains(0.4, 0.3, -0.5, 1.0)
        assert lemma1_eta(params, k) == pytest.approx(0.0, abs=1e-15)

    def test_negative_eta(self, params):
        """Test the human-driven gains violate the necessary condition."""
        eta = lemma1_eta(params, Gains.from_sequence(ref.K_HDV))
        assert eta == pytest.approx(-0.55)

    def test_curvature_matches_finite_difference(self, params, k_unc):
        """Test the analytic curvature against a second difference."""
        limits = zero_frequency_derivatives(params, k_unc)
        tf = DelayTF.from_gains(params, k_unc)
        h = 1e-2
        estimate = 2.0 * (exact_magnitude(tf, h) - 1.0) / h**2
        assert limits.value == 1.0
        assert limits.slope == 0.0
        assert estimate == pytest.approx(limits.curvature, rel=1e-2)
        assert limits.curvature == pytest.approx(-1.0672 / 0.92**2, rel=1e-9)

    def test_curvature_sign_for_string_stable_design(self, params, k_unc):
        """Test that the second difference near zero is not positive."""
        tf = DelayTF.from_gains(params, k_unc)
        w, h = 1e-3, 5e-4
        second = (
            exact_magnitude(tf, w + h)
            - 2 * exact_magnitude(tf, w)
            + exact_magnitude(tf, w - h)
        )
        assert second <= 1e-6

    def test_requires_positive_k1(self, params):
        """Test that k1 <= 0 is rejected."""
        with pytest.raises(ConfigurationError):
            zero_frequency_derivatives(params, Gains(0.0, 1.0, 0.0, 0.0))
