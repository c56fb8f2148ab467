import numpy as np
import pytest

from fidscan.scaling import (classify_transition, exponents_from_k,
                             fit_central_charge, fit_dc_nu, fit_powerlaw,
                             fit_saturation, k_from_delta_q,
                             k_from_energy_exponent, k_from_nu)

SIZES = np.array([40.0, 80.0, 120.0, 200.0, 400.0])


class TestExponentRelations:

    def test_k_085(self):
        es = exponents_from_k(0.85)
        assert es.nu == pytest.approx(1.0 / 1.15, abs=1e-12)
        assert es.delta_q == pytest.approx(-1.3, abs=1e-12)
        assert es.classification == "2QPT"

    def test_k_1328(self):
        es = exponents_from_k(1.328)
        assert 1.0 < es.rho < 2.0
        assert es.classification == "3QPT"

    def test_delta_q_sign_boundary(self):
        assert exponents_from_k(1.5).delta_q == pytest.approx(0.0, abs=1e-12)

    def test_k_1580(self):
        es = exponents_from_k(1.580)
        assert es.rho == pytest.approx(3.7619047619, abs=1e-9)
        assert es.classification == "QPT of order 5 or higher"

    @pytest.mark.parametrize("k", [0.0, 2.0, -0.3, 2.5])
    def test_domain_guard(self, k):
        with pytest.raises(ValueError):
            exponents_from_k(k)

    def test_identities_over_grid(self):
        # 100-point grid: the four closed forms must agree to 1e-12
        for k in np.linspace(0.02, 1.98, 100):
            es = exponents_from_k(k)
            assert abs(es.nu - 1.0 / (2.0 - k)) < 1e-12
            assert abs(es.delta_q - (2.0 * k - 3.0)) < 1e-12
            assert abs(es.rho - k / (2.0 - k)) < 1e-12
            assert abs(es.energy_exponent - 2.0 * (1.0 - k)) < 1e-12
            # consistency between the fields themselves
            assert abs(es.energy_exponent + (es.rho - 1.0) / es.nu) < 1e-12
            assert es.delta_v == es.k
            assert abs(es.delta_q - (2 * es.delta_v - 2 * es.z - es.d)) < 1e-12

    def test_inversions_roundtrip(self):
        for k in (0.3, 0.85, 1.328, 1.580):
            es = exponents_from_k(k)
            assert k_from_nu(es.nu) == pytest.approx(k, abs=1e-12)
            assert k_from_delta_q(es.delta_q) == pytest.approx(k, abs=1e-12)
            assert k_from_energy_exponent(es.energy_exponent) == \
                pytest.approx(k, abs=1e-12)

    def test_classification_gap_region(self):
        assert classify_transition(2.5) == "4QPT"


class TestFitDcNu:

    def test_noiseless_recovery(self):
        points = list(zip(SIZES, 2.3 + 0.5 * SIZES ** (-1 / 0.8)))
        result = fit_dc_nu(points)
        assert result.parameters["d_c"][0] == pytest.approx(2.3, abs=1e-6)
        assert result.parameters["nu"][0] == pytest.approx(0.8, abs=1e-6)
        assert result.parameters["amplitude"][0] == pytest.approx(0.5,
                                                                  abs=1e-6)
        assert result.rss < 1e-12

    def test_negative_amplitude_branch(self):
        points = list(zip(SIZES, 0.63 - 1.2 * SIZES ** (-1 / 1.51)))
        result = fit_dc_nu(points)
        assert result.parameters["d_c"][0] == pytest.approx(0.63, abs=1e-6)
        assert result.parameters["nu"][0] == pytest.approx(1.51, abs=1e-5)

    def test_reorder_invariance(self):
        points = list(zip(SIZES, 2.3 + 0.5 * SIZES ** (-1 / 0.8)))
        shuffled = [points[3], points[0], points[4], points[2], points[1]]
        a = fit_dc_nu(points)
        b = fit_dc_nu(shuffled)
        assert a.parameters["d_c"][0] == pytest.approx(
            b.parameters["d_c"][0], abs=1e-10)

    def test_needs_four_points(self):
        with pytest.raises(ValueError):
            fit_dc_nu([(40, 2.4), (80, 2.35), (120, 2.33)])

    def test_needs_distinct_sizes(self):
        with pytest.raises(ValueError):
            fit_dc_nu([(40, 2.4), (40, 2.35), (120, 2.33), (200, 2.31)])

    def test_k_derived_from_nu(self):
        points = list(zip(SIZES, 2.3 + 0.5 * SIZES ** (-1 / 0.8)))
        result = fit_dc_nu(points)
        assert result.derived["k_from_nu"] == pytest.approx(2 - 1 / 0.8,
                                                            abs=1e-5)


class TestFitPowerlaw:

    def test_noiseless_recovery(self):
        points = list(zip(SIZES, 2.0 * SIZES**1.28))
        result = fit_powerlaw(points)
        assert result.parameters["exponent"][0] == pytest.approx(1.28,
                                                                 abs=1e-10)

    def test_scale_invariance_of_slope(self):
        y = 2.0 * SIZES**1.28
        a = fit_powerlaw(list(zip(SIZES, y)))
        b = fit_powerlaw(list(zip(SIZES, 77.7 * y)))
        assert a.parameters["exponent"][0] == pytest.approx(
            b.parameters["exponent"][0], abs=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            fit_powerlaw([(40, 1.0), (80, -2.0), (120, 3.0)])

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            fit_powerlaw([(40, 1.0), (80, 2.0)])


class TestFitSaturation:

    def test_noiseless_recovery_of_reference_values(self):
        points = list(zip(SIZES, 0.073 - 0.23 * SIZES ** (-0.75)))
        result = fit_saturation(points)
        assert result.parameters["y_inf"][0] == pytest.approx(0.073,
                                                              abs=1e-6)
        assert result.parameters["a"][0] == pytest.approx(0.23, abs=1e-6)
        assert result.parameters["b"][0] == pytest.approx(0.75, abs=1e-6)

    def test_constant_series(self):
        points = list(zip(SIZES, np.full(len(SIZES), 0.42)))
        result = fit_saturation(points)
        assert result.parameters["a"][0] == pytest.approx(0.0, abs=1e-8)
        assert result.parameters["y_inf"][0] == pytest.approx(0.42, abs=1e-8)

    def test_b_constrained_positive(self):
        points = list(zip(SIZES, 0.073 - 0.23 * SIZES ** (-0.75)))
        assert fit_saturation(points).parameters["b"][0] > 0

    def test_needs_four_points(self):
        with pytest.raises(ValueError):
            fit_saturation([(40, 0.05), (80, 0.06), (120, 0.065)])


class TestFitCentralCharge:

    def test_noiseless_recovery(self):
        points = list(zip(SIZES, np.log2(SIZES) / 6.0 + 0.4))
        result = fit_central_charge(points)
        assert result.parameters["c"][0] == pytest.approx(1.0, abs=1e-10)

    def test_flat_series_gives_zero(self):
        points = list(zip(SIZES, np.full(len(SIZES), 1.3)))
        result = fit_central_charge(points)
        assert result.parameters["c"][0] == pytest.approx(0.0, abs=1e-12)

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            fit_central_charge([(40, 1.0), (80, 1.1)])
