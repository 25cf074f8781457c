"""Heston CF, the variance-direction partial transform and Bates jumps."""

import numpy as np
import pytest
from scipy.special import gammaln

from jumpcos import heston as hs
from jumpcos.errors import ParameterError
from jumpcos.models import HestonParams, JumpSizeDist, scenario

HP = scenario("A").heston.heston
JD = scenario("A").hqh.jumps.sizes


class TestHestonCf:
    def test_unit_modulus_at_origin(self):
        assert hs.cf_heston(0.0, 1.0, HP) == pytest.approx(1.0, abs=1e-14)

    def test_black_scholes_limit(self):
        # Vanishing vol-of-vol with v0 = theta freezes the variance.
        hp = HestonParams(9.0, 0.1, 0.16, 5.0, 0.16, 1e-4, 0.0)
        u = np.array([0.5, 2.0, 7.5])
        bs = np.exp(1j * u * (0.1 - 0.08) - 0.5 * 0.16 * u * u)
        np.testing.assert_allclose(hs.cf_heston(u, 1.0, hp), bs, atol=1e-6)

    def test_frozen_euler_oracle(self):
        # Full-truncation Euler, 1e6 paths, 500 steps, seed 11: CF of the
        # log increment at u = 2 was 0.759342 + 0.044875j (se 6.5e-4).
        val = hs.cf_heston(2.0, 1.0, HP)
        assert abs(val - (0.759342 + 0.044875j)) < 3 * 6.5e-4

    def test_hermitian(self):
        u = np.linspace(-10, 10, 41)
        vals = hs.cf_heston(u, 1.3, HP)
        np.testing.assert_allclose(vals, np.conj(vals[::-1]), atol=1e-13)


class TestVarianceTransform:
    def test_density_normalizes(self):
        nodes, w = hs.variance_quadrature(1.0, HP, 64)
        total = (w * hs.psi_v(0.0, nodes, HP.v0, 1.0, HP)).sum()
        assert abs(total - 1.0) < 1e-6

    def test_marginalizes_to_heston_cf(self):
        rng = np.random.default_rng(21)
        for _ in range(6):
            u = rng.uniform(-15, 15)
            tau = rng.uniform(0.2, 1.5)
            v0 = rng.uniform(0.02, 0.4)
            hp = HestonParams(HP.s0, HP.r, v0, HP.kappa, HP.theta, HP.eta, HP.rho)
            nodes, w = hs.variance_quadrature(tau, hp, 64)
            integ = (w * hs.psi_v(u, nodes, v0, tau, hp)).sum()
            assert abs(integ - hs.cf_heston(u, tau, hp)) < 1e-6

    def test_cir_first_moment(self):
        nodes, w = hs.variance_quadrature(1.0, HP, 64)
        mean = (w * nodes * hs.psi_v(0.0, nodes, HP.v0, 1.0, HP)).sum().real
        expect = HP.theta + (HP.v0 - HP.theta) * np.exp(-HP.kappa)
        assert abs(mean - expect) < 1e-6

    def test_rejects_negative_variance(self):
        with pytest.raises(ParameterError):
            hs.psi_v(1.0, -0.1, 0.05, 1.0, HP)


class TestBesselScaled:
    @staticmethod
    def _series(order, z, terms=60):
        # Ascending series of the modified Bessel function.
        k = np.arange(terms)
        log_coeff = -gammaln(k + 1.0) - gammaln(k + order + 1.0)
        return np.sum(np.exp(log_coeff) * (z / 2.0) ** (2 * k + order))

    @staticmethod
    def _asymptotic(order, z, terms=12):
        # Large-argument expansion I_v(z) ~ e^z/sqrt(2 pi z) * sum.
        mu = 4.0 * order**2
        term = 1.0 + 0j
        total = term
        for k in range(1, terms):
            term *= -(mu - (2 * k - 1) ** 2) / (8.0 * z * k)
            total += term
        return np.exp(z) / np.sqrt(2.0 * np.pi * z) * total

    def test_matches_series_small_arguments(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            z = rng.uniform(0.1, 18.0) + 1j * rng.uniform(-5.0, 5.0)
            val, scale = hs.bessel_iv_scaled(0.975, np.array(z))
            direct = val * np.exp(scale)
            assert abs(direct - self._series(0.975, z)) / abs(direct) < 1e-10

    def test_matches_asymptotics_large_arguments(self):
        for z in (60.0 + 0j, 90.0 + 25j, 150.0 - 40j):
            val, scale = hs.bessel_iv_scaled(0.975, np.array(z))
            ref = self._asymptotic(0.975, z)
            direct = val * np.exp(scale - abs(np.real(z)))
            assert abs(direct - ref * np.exp(-abs(np.real(z)))) / abs(ref * np.exp(-abs(np.real(z)))) < 1e-10

    def test_overlap_region_consistency(self):
        # Series and asymptotics agree with the implementation in between.
        for z in (25.0 + 3j, 30.0 - 8j):
            val, scale = hs.bessel_iv_scaled(0.975, np.array(z))
            direct = val * np.exp(scale)
            ser = self._series(0.975, z, terms=120)
            asy = self._asymptotic(0.975, z)
            assert abs(direct - ser) / abs(direct) < 1e-10
            assert abs(direct - asy) / abs(direct) < 1e-8

    def test_no_overflow_for_huge_arguments(self):
        val, scale = hs.bessel_iv_scaled(0.975, np.array(800.0 + 120j))
        assert np.isfinite(val).all()


class TestBatesJumps:
    def test_no_jumps(self):
        assert hs.cf_bates_jumps(1.3, 1.0, 0.0, JD) == pytest.approx(1.0, abs=1e-15)

    def test_normalization(self):
        assert hs.cf_bates_jumps(0.0, 1.0, 1.7, JD) == pytest.approx(1.0, abs=1e-15)

    def test_frozen_compound_poisson_oracle(self):
        # 1e6 draws, seed 9009: E[e^{i M}] for unit intensity, scenario A
        # jump sizes, tau = 1: 0.886178 - 0.066891j (se 4.58e-4).
        val = hs.cf_bates_jumps(1.0, 1.0, 1.0, JD)
        assert abs(val - (0.886178 - 0.066891j)) < 3 * 4.58e-4

    def test_rejects_negative_intensity(self):
        with pytest.raises(ParameterError):
            hs.cf_bates_jumps(1.0, 1.0, -0.5, JD)
