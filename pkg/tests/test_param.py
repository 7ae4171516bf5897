"""
Tests for the stability-region charts and their inverses.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platoon_synth.exceptions import ConfigurationError, InfeasibleBox, NotInManifold
from platoon_synth.model import Gains, VehicleParams, lemma1_eta, stability_margins
from platoon_synth.param import (
    XYZW,
    BoxBounds,
    Chart,
    chart_functions,
    corollary1_extract,
    corollary1_map,
    corollary2_map,
    corollary3_extract,
    kpr_map,
    manifold_coordinates,
    prop1_map,
    prop2_map,
    rho,
    sigmoid,
    sigmoid_inverse,
)

from tests import reference_data as ref

SMALL = VehicleParams(theta=ref.SMALL_DELAY, **ref.PLANT)
LARGE = VehicleParams(theta=ref.LARGE_DELAY, **ref.PLANT)
BOX1 = BoxBounds.symmetric(1.32)
BOX2 = BoxBounds.symmetric(2.0)

CONFIGURATIONS = [
    pytest.param(SMALL, BOX1, id="small-delay"),
    pytest.param(LARGE, BOX2, id="large-delay"),
    pytest.param(SMALL, BoxBounds.symmetric(1.0), id="unit-box"),
]

kappa_vectors = st.lists(st.floats(-3.0, 3.0), min_size=4, max_size=4)


def _close(actual: Gains, expected, tol=ref.CHAIN_TOLERANCE):
    np.testing.assert_allclose(actual.as_array(), expected, atol=tol)


class TestSquashing:
    """Tests for sigmoid, sigmoid_inverse and rho."""

    def test_sigmoid_value(self):
        """Test the first optimal chart coordinate."""
        assert sigmoid(ref.KAPPA_STAR_1[0], 5.0) == pytest.approx(0.3191, abs=1e-4)

    def test_rho_value(self):
        """Test the first stage-one chart coordinate."""
        assert rho(ref.MU0_1[0], 5.0) == pytest.approx(0.6128, abs=1e-4)

    def test_sigmoid_extremes(self):
        """Test that large arguments saturate without overflow."""
        assert sigmoid(-1000.0) == 0.0
        assert sigmoid(1000.0) == 1.0
        assert sigmoid(0.0) == 0.5

    @given(beta=st.floats(-5.0, 5.0))
    def test_sigmoid_inverse(self, beta):
        """Test that sigmoid_inverse undoes sigmoid away from saturation."""
        assert sigmoid_inverse(sigmoid(beta, 2.0), 2.0) == pytest.approx(beta, abs=1e-9)

    def test_sigmoid_inverse_clamps(self):
        """Test that 0 and 1 give finite values."""
        assert math.isfinite(sigmoid_inverse(0.0))
        assert math.isfinite(sigmoid_inverse(1.0))

    def test_rho_range(self):
        """Test rho(0) = 1 and rho -> 0 for large arguments."""
        assert rho(0.0) == 1.0
        assert 0.0 < rho(1e3) < 1e-6


class TestBoxBounds:
    """Tests for BoxBounds."""

    def test_symmetric(self):
        """Test the symmetric box constructor."""
        assert BOX1.lower == (0.0, -1.32, -1.32, -1.32)
        assert BOX1.upper == (1.32, 1.32, 1.32, 1.32)

    def test_inverted_bounds(self):
        """Test that lower > upper is rejected."""
        with pytest.raises(ConfigurationError, match="k2"):
            BoxBounds(lower=(0, 1, 0, 0), upper=(1, 0, 1, 1))

    def test_wrong_length(self):
        """Test that the bounds must have four entries."""
        with pytest.raises(ConfigurationError):
            BoxBounds(lower=(0, 0, 0), upper=(1, 1, 1))

    def test_ensure_nonempty(self):
        """Test that a box without positive k1 is infeasible."""
        BOX1.ensure_nonempty()
        with pytest.raises(InfeasibleBox):
            BoxBounds(lower=(0, -1, -1, -1), upper=(0, 1, 1, 1)).ensure_nonempty()

    def test_negative_k1_upper_is_infeasible(self):
        """Test that k1 upper below the default lower bound is an infeasible box."""
        box = BoxBounds(lower=(0, -1, -1, -1), upper=(-0.5, 1, 1, 1))
        with pytest.raises(InfeasibleBox) as excinfo:
            box.ensure_nonempty()
        assert excinfo.value.coordinate == "k1"

    def test_contains(self):
        """Test membership with and without tolerance."""
        assert BOX1.contains(Gains.from_sequence(ref.K_STAR_1))
        assert not BOX1.contains(Gains(1.5, 0.0, 0.0, 0.0))
        assert BOX1.contains(Gains(1.32 + 1e-13, 0.0, 0.0, 0.0))

    def test_dict_round_trip(self):
        """Test dictionary round trip."""
        assert BoxBounds.from_dict(BOX2.to_dict()) == BOX2


class TestBoundMaps:
    """Tests for prop1_map and prop2_map."""

    def test_prop1_has_no_w(self):
        """Test that the three-coordinate map leaves w unset."""
        point = prop1_map([0.5, 0.5, 0.5], SMALL, BOX1)
        assert point.w is None
        with pytest.raises(ConfigurationError):
            point.to_gains(SMALL)

    def test_prop2_gains_satisfy_conditions(self):
        """Test that the four-coordinate map yields stable, boxed, eta >= 0 gains."""
        k = prop2_map([0.2, 0.7, 0.4, 0.9], SMALL, BOX1).to_gains(SMALL)
        assert all(m > 0 for m in stability_margins(SMALL, k))
        assert BOX1.contains(k, 1e-9)
        assert lemma1_eta(SMALL, k) >= -1e-12

    def test_corner_psi(self):
        """Test that psi on the unit-cube corners is accepted."""
        for psi in ([0, 0, 0, 0], [1, 1, 1, 1]):
            assert isinstance(prop2_map(psi, SMALL, BOX1), XYZW)

    @pytest.mark.parametrize("psi", [[0.5, 0.5], [0.5, 1.5, 0.5], [-0.1, 0.5, 0.5]])
    def test_invalid_psi(self, psi):
        """Test that short or out-of-range psi is rejected."""
        with pytest.raises(ConfigurationError):
            prop1_map(psi, SMALL, BOX1)

    def test_empty_y_interval(self):
        """Test InfeasibleBox when k2 cannot accommodate a positive y."""
        box = BoxBounds(lower=(1.0, -1.0, -1.0, -1.0), upper=(1.0, -1.0, 1.0, 1.0))
        with pytest.raises(InfeasibleBox) as excinfo:
            prop1_map([0.5, 0.5, 0.5], SMALL, box)
        assert excinfo.value.coordinate == "y"

    def test_k3_lower_bound_too_high(self):
        """Test InfeasibleBox when k3 >= 1/K is forced."""
        box = BoxBounds(lower=(0.0, -1.0, 1.5, -1.0), upper=(1.0, 1.0, 2.0, 1.0))
        with pytest.raises(InfeasibleBox) as excinfo:
            prop2_map([0.5] * 4, SMALL, box)
        assert excinfo.value.coordinate == "k3"


class TestPublishedChain:
    """Reproduction of the published parameter/gain pairs."""

    def test_optimal_kappa_small_delay(self):
        """Test kappa* -> k* for the small-delay setting."""
        _close(corollary2_map(ref.KAPPA_STAR_1, SMALL, BOX1), ref.K_STAR_1)

    def test_initial_kappa_small_delay(self):
        """Test kappa0 -> k0 for the small-delay setting."""
        _close(corollary2_map(ref.KAPPA0_1, SMALL, BOX1), ref.K0_1)

    def test_stage_one_small_delay(self):
        """Test mu0 -> k0 under the box-only chart."""
        _close(kpr_map(ref.MU0_1, BOX1), ref.K0_1)

    def test_extract_small_delay(self):
        """Test k0 -> kappa0 by sequential extraction."""
        kappa = corollary3_extract(Gains.from_sequence(ref.K0_1), SMALL, BOX1)
        np.testing.assert_allclose(kappa, ref.KAPPA0_1, atol=ref.CHAIN_TOLERANCE)

    def test_optimal_kappa_large_delay(self):
        """Test kappa* -> k* for the large-delay setting."""
        _close(corollary2_map(ref.KAPPA_STAR_2, LARGE, BOX2), ref.K_STAR_2)

    def test_stage_one_large_delay(self):
        """Test mu0 -> k0 for the large-delay setting."""
        _close(kpr_map(ref.MU0_2, BOX2), ref.K0_2)

    def test_initial_kappa_large_delay(self):
        """Test kappa0 -> k0 for the large-delay setting."""
        _close(corollary2_map(ref.KAPPA0_2, LARGE, BOX2), ref.K0_2)


class TestKprMap:
    """Tests for the box-only chart."""

    def test_zero_gives_upper_bounds(self):
        """Test mu = 0 -> upper bounds."""
        assert kpr_map([0, 0, 0, 0], BOX1).as_list() == list(BOX1.upper)

    def test_large_mu_approaches_lower_bounds(self):
        """Test that k1 stays above epsilon for large mu."""
        k = kpr_map([1e4] * 4, BOX1)
        assert k.k1 > 0
        np.testing.assert_allclose(k.as_array()[1:], BOX1.lower[1:], atol=1e-6)

    def test_even_in_mu(self):
        """Test that the chart depends on mu only through mu^2."""
        forward = kpr_map([0.3, -0.2, 1.0, -2.0], BOX2)
        assert forward == kpr_map([-0.3, 0.2, -1.0, 2.0], BOX2)

    def test_wrong_length(self):
        """Test that mu must have four entries."""
        with pytest.raises(ConfigurationError):
            kpr_map([0.0, 0.0], BOX1)


class TestSoundness:
    """Every chart image is locally stable, inside the box and eta >= 0."""

    @pytest.mark.parametrize("p,box", CONFIGURATIONS)
    def test_corollary2_random(self, p, box):
        """Test 10^4 random kappa per configuration."""
        rng = np.random.default_rng(2024)
        for kappa in rng.uniform(-3.0, 3.0, size=(10_000, 4)):
            k = corollary2_map(kappa, p, box)
            assert all(m > 0 for m in stability_margins(p, k)), kappa
            assert box.contains(k, 1e-9), kappa
            assert lemma1_eta(p, k) >= -1e-12, kappa

    @pytest.mark.parametrize("p,box", CONFIGURATIONS)
    def test_corollary1_random(self, p, box):
        """Test that the unconstrained-k4 chart is stable and boxed."""
        rng = np.random.default_rng(7)
        for kappa in rng.uniform(-3.0, 3.0, size=(2_000, 4)):
            k = corollary1_map(kappa, p, box)
            assert all(m > 0 for m in stability_margins(p, k)), kappa
            assert box.contains(k, 1e-9), kappa

    @settings(max_examples=300, deadline=None)
    @given(kappa=kappa_vectors)
    def test_round_trip_corollary2(self, kappa):
        """Test map(extract(map(kappa))) = map(kappa)."""
        k = corollary2_map(kappa, SMALL, BOX1)
        recovered = corollary3_extract(k, SMALL, BOX1)
        again = corollary2_map(recovered, SMALL, BOX1)
        np.testing.assert_allclose(again.as_array(), k.as_array(), atol=1e-9)

    @pytest.mark.slow
    @pytest.mark.parametrize("p,box", CONFIGURATIONS[:2])
    def test_round_trip_corollary2_random(self, p, box):
        """Test the constrained round trip on 10^4 random kappa per configuration."""
        rng = np.random.default_rng(11)
        for kappa in rng.uniform(-3.0, 3.0, size=(10_000, 4)):
            k = corollary2_map(kappa, p, box)
            again = corollary2_map(corollary3_extract(k, p, box), p, box)
            np.testing.assert_allclose(
                again.as_array(), k.as_array(), atol=1e-9, err_msg=str(kappa)
            )

    @settings(max_examples=300, deadline=None)
    @given(kappa=kappa_vectors)
    def test_round_trip_corollary1(self, kappa):
        """Test the round trip of the unconstrained-k4 chart."""
        k = corollary1_map(kappa, LARGE, BOX2)
        recovered = corollary1_extract(k, LARGE, BOX2)
        again = corollary1_map(recovered, LARGE, BOX2)
        np.testing.assert_allclose(again.as_array(), k.as_array(), atol=1e-9)


class TestExtraction:
    """Tests for corollary3_extract and corollary1_extract failure modes."""

    @pytest.mark.parametrize("k1", [-1e-3, -0.5, 2.0])
    def test_k1_outside(self, k1):
        """Test that k1 outside (epsilon, k1u) fails on coordinate 1."""
        with pytest.raises(NotInManifold) as excinfo:
            corollary3_extract(Gains(k1, 0.3, 0.0, 0.5), SMALL, BOX1)
        assert excinfo.value.coordinate == 1

    def test_chart_image_on_upper_bounds(self):
        """Test that gains on the upper x and w endpoints extract and round-trip."""
        kappa = [8.0, 0.3, -0.2, 8.0]
        k = corollary2_map(kappa, SMALL, BOX1)
        assert k.k1 == pytest.approx(BOX1.upper[0], abs=1e-12)
        recovered = corollary3_extract(k, SMALL, BOX1)
        assert np.all(np.isfinite(recovered))
        again = corollary2_map(recovered, SMALL, BOX1)
        np.testing.assert_allclose(again.as_array(), k.as_array(), atol=1e-9)

    def test_endpoint_slack_is_relative(self):
        """Test that k1 just past the box bound is clamped but 1e-6 past is not."""
        kappa = [8.0, 0.3, -0.2, 0.0]
        k = corollary2_map(kappa, SMALL, BOX1)
        nudged = Gains(k.k1 + 1e-12, k.k2, k.k3, k.k4)
        assert np.all(np.isfinite(corollary3_extract(nudged, SMALL, BOX1)))
        with pytest.raises(NotInManifold) as excinfo:
            corollary3_extract(Gains(k.k1 + 1e-6, k.k2, k.k3, k.k4), SMALL, BOX1)
        assert excinfo.value.coordinate == 1

    def test_k2_above_box(self):
        """Test that k2 beyond its upper bound is rejected on coordinate 2."""
        with pytest.raises(NotInManifold) as excinfo:
            corollary3_extract(Gains(0.92, 1.4, -0.92, 0.72), SMALL, BOX1)
        assert excinfo.value.coordinate == 2

    def test_negative_eta(self):
        """Test that eta < 0 fails on coordinate 4 of the constrained chart."""
        k = Gains.from_sequence(ref.K_HDV)
        assert lemma1_eta(SMALL, k) < 0
        with pytest.raises(NotInManifold) as excinfo:
            corollary3_extract(k, SMALL, BOX1)
        assert excinfo.value.coordinate == 4

    def test_negative_eta_in_unconstrained_chart(self):
        """Test that the unconstrained-k4 chart still represents eta < 0 gains."""
        k = Gains.from_sequence(ref.K_HDV)
        kappa = corollary1_extract(k, SMALL, BOX1)
        _close(corollary1_map(kappa, SMALL, BOX1), ref.K_HDV, tol=1e-9)

    def test_collapsed_interval(self):
        """Test that a fixed k4 extracts to the midpoint psi."""
        box = BoxBounds(lower=(0.0, -1.32, -1.32, 0.5), upper=(1.32, 1.32, 1.32, 0.5))
        k = corollary1_map([0.1, 0.2, -0.3, 1.0], SMALL, box)
        kappa = corollary1_extract(k, SMALL, box)
        assert kappa[3] == pytest.approx(0.0, abs=1e-12)

    def test_manifold_coordinates(self):
        """Test phi1..phi4 against their definitions."""
        k = Gains(0.5, 0.2, 0.0, 0.0)
        phi = manifold_coordinates(k, SMALL)
        assert phi[0] == 0.5
        assert phi[1] == pytest.approx(0.7)
        assert phi[2] == pytest.approx(1.0 - 0.45 * 0.5 / 0.7)
        assert phi[3] == pytest.approx(0.25 + 0.2 - 1.0)


class TestChartFunctions:
    """Tests for chart_functions."""

    def test_corollary1(self):
        """Test the unconstrained-k4 pair."""
        assert chart_functions(Chart.COROLLARY1) == (corollary1_map, corollary1_extract)

    def test_corollary2(self):
        """Test the eta-constrained pair."""
        assert chart_functions(Chart.COROLLARY2) == (corollary2_map, corollary3_extract)
