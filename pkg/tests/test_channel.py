import math

import numpy as np
import pytest
from scipy import stats

from noma_isac.channel import (
    SPEED_OF_LIGHT,
    SystemParams,
    db_to_linear,
    dbm_to_watt,
    noise_model,
    radar_channel,
    sample_comm_channel,
    sample_comm_channels,
    watt_to_dbm,
)
from noma_isac.errors import DomainError

P = SystemParams()


class TestSystemParams:
    def test_table_defaults(self):
        assert (P.alpha, P.f_c, P.bandwidth, P.T, P.noise_density) == (3.5, 5.8e9, 10e6, 10e-6, -174.0)
        assert (P.M, P.K, P.G_t, P.G_r, P.rcs) == (5, 2, 2.0, 2.0, 0.0)
        assert P.theta_o == math.pi / 4 and P.theta_r == math.pi / 2

    def test_beta(self):
        assert abs(P.beta[0] - 1.131e-6) / 1.131e-6 < 1e-3
        assert P.beta[0] == 50.0 ** -3.5

    def test_power_split(self):
        p = SystemParams(P_com=2.0, power_split=0.25)
        assert p.powers == (0.5, 1.5)

    @pytest.mark.parametrize(
        "kw",
        [{"alpha": 0}, {"M": 1}, {"K": 3}, {"power_split": 1.0}, {"power_split": 0.0},
         {"P_com": -1}, {"P_r": -1}, {"d1": 0}, {"R": -2}, {"bandwidth": 0}],
    )
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            SystemParams(**kw)


class TestConversions:
    def test_db(self):
        assert db_to_linear(10.0) == 10.0
        assert dbm_to_watt(30.0) == 1.0
        assert abs(watt_to_dbm(1e-3)) < 1e-12

    def test_array(self):
        assert np.allclose(db_to_linear(np.array([0.0, 20.0])), [1.0, 100.0])

    def test_minus_infinity_is_zero(self):
        assert dbm_to_watt(-math.inf) == 0.0


class TestCommChannel:
    def test_shape_and_beta(self):
        ch = sample_comm_channel(np.random.default_rng(0), P)
        assert ch.H.shape == (5, 2)
        assert ch.beta == P.beta

    def test_norm_mean(self):
        H = sample_comm_channels(np.random.default_rng(1), P, 100_000)
        for k in range(2):
            norms = np.sum(np.abs(H[:, :, k]) ** 2, axis=1)
            se = norms.std() / math.sqrt(len(norms))
            assert abs(norms.mean() - P.M * P.beta[k]) < 3 * se

    def test_zero_mean(self):
        H = sample_comm_channels(np.random.default_rng(2), P, 100_000)
        for k in range(2):
            x = H[:, 0, k]
            se = math.sqrt(P.beta[k] / 2 / len(x))
            assert abs(x.real.mean()) < 3 * se and abs(x.imag.mean()) < 3 * se

    def test_norm_is_gamma(self):
        H = sample_comm_channels(np.random.default_rng(3), P, 20_000)
        norms = np.sum(np.abs(H[:, :, 0]) ** 2, axis=1)
        assert stats.kstest(norms, stats.gamma(a=P.M, scale=P.beta[0]).cdf).pvalue > 0.01


class TestRadarChannel:
    def test_wavelength(self):
        assert abs(P.wavelength - 0.051688) < 1e-6
        assert P.wavelength == SPEED_OF_LIGHT / 5.8e9

    def test_gain_formula(self):
        g = radar_channel(P, 0)
        lin = 10 ** 0.2 * 10 ** 0.2 * 1.0
        ref = P.wavelength / (8 * 30.0**2) * math.sqrt(lin / math.pi**3)
        assert abs(g.g_prime - ref) / ref < 1e-14
        assert g.g_prime > 0

    @pytest.mark.parametrize("mu", [0, 1, 7, 12345])
    def test_unit_modulus_phase(self, mu):
        g = radar_channel(P, mu)
        assert abs(abs(g.g) - g.g_prime) < 1e-15 * g.g_prime * 10

    def test_zero_index(self):
        g = radar_channel(P, 0)
        ref = g.g_prime * np.exp(-2j * math.pi * g.Theta)
        assert abs(g.g - ref) < 1e-20

    def test_doppler_and_delay(self):
        g = radar_channel(P, 0)
        assert g.Theta == 2 * 30.0 / SPEED_OF_LIGHT
        assert g.f_d == 2 * 10.0 * 5.8e9 / SPEED_OF_LIGHT

    def test_deterministic(self):
        assert radar_channel(P, 3) == radar_channel(P, 3)

    def test_vector(self):
        g = radar_channel(P, 2)
        v = g.vector(5)
        assert v.shape == (5,) and np.all(v == g.g)

    def test_invalid_range(self):
        # SystemParams already guards R, so bypass it
        bad = SystemParams()
        object.__setattr__(bad, "R", 0.0)
        with pytest.raises(DomainError):
            radar_channel(bad, 0)


class TestNoise:
    def test_variance(self):
        nm = noise_model(P)
        assert abs(nm.variance - 3.981e-14) / 3.981e-14 < 1e-3
        assert nm.combined_variance == 2 * nm.variance

    def test_linear_in_bandwidth(self):
        a = noise_model(P).variance
        b = noise_model(SystemParams(bandwidth=20e6)).variance
        assert abs(b / a - 2.0) < 1e-12

    def test_combined_power(self):
        nm = noise_model(P)
        rng = np.random.default_rng(5)
        n = nm.sample(rng, (2, 1_000_000))
        comb = np.abs(n[0] + n[1]) ** 2
        se = comb.std() / math.sqrt(comb.size)
        assert abs(comb.mean() - 2 * nm.variance) < 3 * se
