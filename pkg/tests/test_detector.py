import math

import numpy as np
import pytest
from scipy.optimize import brentq

from nvgyro import (
    DetectorConfig,
    NoiseHooks,
    normalize_contrast,
    photoelectron_count,
    psn_fractional_uncertainty,
    psn_rotation_sensitivity,
    readout_voltage,
)
from nvgyro.detector import rotation_unit_conversion
from nvgyro.spin import ELEMENTARY_CHARGE

D = DetectorConfig()


class TestReadoutVoltage:
    def test_bright_endpoint(self):
        assert readout_voltage(1.0, D) == pytest.approx(15.1125, abs=1e-12)

    def test_dark_endpoint(self):
        assert readout_voltage(0.0, D) == pytest.approx(14.8875, abs=1e-12)

    def test_linear_interpolation(self):
        lo, hi = readout_voltage(0.0, D), readout_voltage(1.0, D)
        assert readout_voltage(0.25, D) == pytest.approx(lo + 0.25 * (hi - lo))

    def test_balanced_noise_is_sqrt2_larger(self):
        unbalanced = D.replace(balanced=False)
        ratio = (psn_fractional_uncertainty(D) /
                 psn_fractional_uncertainty(unbalanced))
        assert ratio == pytest.approx(math.sqrt(2), rel=1e-12)

    def test_monte_carlo_noise_std(self):
        # 1e5 noisy draws match the analytic photon-shot-noise std within 2%
        rng = np.random.default_rng(321)
        draws = readout_voltage(np.full(100_000, 0.5), D, rng)
        predicted = D.V0 * psn_fractional_uncertainty(D)
        assert np.std(draws) == pytest.approx(predicted, rel=0.02)

    def test_array_projection(self):
        out = readout_voltage(np.array([0.0, 1.0]), D)
        assert out.shape == (2,)


class TestNormalizeContrast:
    def test_identity(self):
        assert normalize_contrast(15.0, 15.0) == 1.0

    def test_arithmetic(self):
        assert normalize_contrast(15.1125, 15.0) == pytest.approx(1.0075)

    def test_fractional_uncertainty_preserved(self):
        # delta_S / S0 equals delta_V / V0 when dividing by a constant V_pump
        dv = 1e-3
        s1 = normalize_contrast(D.V0 + dv, D.v_pump)
        s0 = normalize_contrast(D.V0, D.v_pump)
        assert (s1 - s0) / s0 == pytest.approx(dv / D.V0, rel=1e-9)

    def test_nonpositive_vpump(self):
        with pytest.raises(ValueError):
            normalize_contrast(15.0, 0.0)


class TestPhotoelectronCount:
    def test_default_count(self):
        # (15 / (1.75e5 * q_e)) * 17e-6 ~ 9.1e9
        n = photoelectron_count(D, 1)
        assert n == pytest.approx(9.095e9, rel=1e-3)

    def test_zero_measurements_rejected(self):
        with pytest.raises(ValueError):
            photoelectron_count(D, 0)

    def test_linearity_in_readout_time(self):
        doubled = D.replace(t_R=2 * D.t_R)
        assert photoelectron_count(doubled, 1) == pytest.approx(
            2 * photoelectron_count(D, 1), rel=1e-12
        )

    def test_linearity_in_n_meas(self):
        assert photoelectron_count(D, 7) == pytest.approx(
            7 * photoelectron_count(D, 1), rel=1e-12
        )


class TestPsnFractionalUncertainty:
    def test_two_photoelectrons_balanced_gives_unity(self):
        # craft a detector with N_p = 2
        d = DetectorConfig(V0=1.0, G=1e-6 / (2 * ELEMENTARY_CHARGE), t_R=1e-6)
        assert photoelectron_count(d, 1) == pytest.approx(2.0, rel=1e-12)
        assert psn_fractional_uncertainty(d) == pytest.approx(1.0, rel=1e-12)

    def test_default_value(self):
        assert psn_fractional_uncertainty(D) == pytest.approx(1.48e-5, rel=0.01)

    def test_unbalanced_halves_variance(self):
        var_b = psn_fractional_uncertainty(D) ** 2
        var_u = psn_fractional_uncertainty(D.replace(balanced=False)) ** 2
        assert var_u == pytest.approx(var_b / 2, rel=1e-12)


class TestRotationSensitivity:
    def test_budget_value(self):
        # exact budget inputs: tau = 1.4 ms, T2* = 2.0 ms, defaults otherwise
        d = D.replace(T2star=2.0e-3)
        sens = psn_rotation_sensitivity(d, 1.4e-3)
        assert sens.hz_per_rt_hz == pytest.approx(9.8e-3, rel=0.02)

    def test_unit_conversion(self):
        assert rotation_unit_conversion(13e-3) == pytest.approx(4.68, abs=1e-12)
        sens = psn_rotation_sensitivity(D, 1.4e-3)
        assert sens.dps_per_rt_s == pytest.approx(sens.hz_per_rt_hz * 360.0)

    def test_divergence_at_small_tau(self):
        small = psn_rotation_sensitivity(D, 1e-9)
        assert small.hz_per_rt_hz > 1e3 * psn_rotation_sensitivity(D, 1.4e-3).hz_per_rt_hz

    def test_invalid_tau(self):
        with pytest.raises(ValueError):
            psn_rotation_sensitivity(D, 0.0)

    def test_optimum_tau_with_overhead(self):
        # duty-cycled sensitivity is minimal at the root of
        # 1/tau - 1/T2* - 1/(2*(tau+overhead)) = 0 and convex around it
        overhead = 0.52e-3
        t2 = D.T2star

        def duty_sens(tau):
            per_meas = psn_rotation_sensitivity(D.replace(t_meas=tau + overhead), tau)
            return per_meas.hz_per_rt_hz

        root = brentq(lambda t: 1 / t - 1 / t2 - 1 / (2 * (t + overhead)), 1e-4, 5e-3)
        taus = np.linspace(0.3e-3, 3.5e-3, 2001)
        vals = np.array([duty_sens(t) for t in taus])
        tau_min = taus[np.argmin(vals)]
        assert tau_min == pytest.approx(root, abs=2 * (taus[1] - taus[0]))
        i = np.argmin(vals)
        second = np.diff(vals, 2)[i - 50:i + 50]
        assert np.all(second > 0)


class TestNoiseHooks:
    def test_defaults_off(self):
        hooks = NoiseHooks()
        assert hooks.white_sigma == 0.0 and hooks.random_walk_sigma == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            NoiseHooks(white_sigma=-1.0)


class TestDetectorConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            DetectorConfig(contrast=0.0)
        with pytest.raises(ValueError):
            DetectorConfig(contrast=1.0)
        with pytest.raises(ValueError):
            DetectorConfig(V0=-1.0)

    def test_levels(self):
        assert D.v_high == pytest.approx(15.1125)
        assert D.v_low == pytest.approx(14.8875)
        assert D.v_pump == D.v_high
