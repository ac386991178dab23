import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from whid import metrics
from whid.errors import DegenerateError, ParameterError

nonzero = arrays(float, st.integers(1, 30), elements=st.floats(-10, 10)).filter(lambda a: np.any(np.abs(a) > 1e-3))


class TestQ:
    r = np.array([1.0, -2.0, 0.5, 0.25])

    def test_double(self):
        assert metrics.q_value(self.r, 2 * self.r) == pytest.approx(0.0)

    def test_scaled(self):
        assert metrics.q_value(self.r, 1.001 * self.r) == pytest.approx(60.0)

    def test_zero_estimate(self):
        assert metrics.q_value(self.r, np.zeros(4)) == pytest.approx(0.0)

    def test_exact(self):
        assert metrics.q_value(self.r, self.r) == math.inf

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            metrics.q_value(self.r, self.r[:3])

    @given(nonzero)
    def test_identity_weighting(self, r):
        est = r * 1.01 + 0.001
        assert metrics.q_prime(r, est, [1.0]) == metrics.q_value(r, est)

    def test_weighting_hides_stopband_error(self):
        n = 64
        t = np.arange(n)
        r = np.cos(2 * np.pi * 0.05 * t) * np.hanning(n)
        err = 0.1 * (-1.0) ** t  # error at Nyquist
        weight = np.ones(8) / 8  # lowpass with a null at 1/2
        q = metrics.q_value(r, r + err)
        qp = metrics.q_prime(r, r + err, weight)
        assert qp - q >= 20

    def test_zero_weighted_reference(self):
        with pytest.raises(DegenerateError):
            metrics.q_prime([1.0, 1.0], [1.0, 0.0], [0.0])


class TestPredicted:
    def test_reference_value(self):
        assert metrics.predicted_q(8000, 20, 20) == pytest.approx(46.02, abs=0.01)

    def test_unit(self):
        assert metrics.predicted_q(5, 5, 0) == 0.0

    def test_doubling(self):
        assert metrics.predicted_q(2000, 10, 7) - metrics.predicted_q(1000, 10, 7) == pytest.approx(3.0103, abs=1e-4)


class TestNmse:
    w = np.array([1.0, 2.0, -3.0])

    def test_exact(self):
        assert metrics.nmse(self.w, self.w) == -math.inf

    def test_zero(self):
        assert metrics.nmse(self.w, np.zeros(3)) == pytest.approx(0.0)

    def test_scaled(self):
        assert metrics.nmse(self.w, self.w * 1.01) == pytest.approx(-40.0)

    def test_zero_reference(self):
        with pytest.raises(DegenerateError):
            metrics.nmse(np.zeros(3), self.w)

    def test_frequency_domain_matches_circular(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(256)
        r, r_hat = rng.standard_normal(8), rng.standard_normal(8)

        def circ(f):
            return np.real(np.fft.ifft(np.fft.fft(x) * np.fft.fft(f, x.size)))

        assert metrics.nmse_frequency_domain(x, r, r_hat) == pytest.approx(metrics.nmse(circ(r), circ(r_hat)))

    def test_sentinel(self):
        assert metrics.csv_db(math.inf) == 400.0
        assert metrics.csv_db(-math.inf) == -400.0
        assert metrics.csv_db(-12.5) == -12.5


class TestBudget:
    def test_unit_snr(self):
        b = metrics.BudgetInputs(noise_variance=0.01, gain=2.0, p_in_sat=3.0)
        assert metrics.snr_budget(b, 1) == pytest.approx(10 * math.log10(4 * 3 / 0.01))

    def test_options_agree(self):
        b = metrics.BudgetInputs(bandwidth_ratio_x=2.5, bandwidth_ratio_u=2.5, par_x1=3.0, ibo=2.0)
        assert metrics.snr_budget(b, 2) == pytest.approx(metrics.snr_budget(b, 1))

    def test_narrative_12db(self):
        base = metrics.BudgetInputs(noise_variance=1e-3)
        b = metrics.BudgetInputs(noise_variance=1e-3, bandwidth_ratio_x=metrics.undb(6), ibo=metrics.undb(6))
        assert metrics.snr_budget(base, 1) - metrics.snr_budget(b, 1) == pytest.approx(12.0)

    def test_bad_option(self):
        with pytest.raises(ParameterError):
            metrics.snr_budget(metrics.BudgetInputs(), 3)

    def test_x2_length(self):
        b = metrics.BudgetInputs(target_nmse_db=-30, taps_g=20, par_x2=4, beta=2, noise_variance=1e-4)
        assert metrics.min_pilot_length(b, "x2") == math.ceil(2 * 1e3 * 20 * 4 * 1e-4) == 16

    def test_ratio_narrative(self):
        common = dict(target_nmse_db=-30, taps=39, taps_g=20, noise_variance=1e-4)
        b = metrics.BudgetInputs(bandwidth_ratio_x=4, ibo=10 ** 0.5, **common)
        ratio = metrics.min_pilot_length(b, "x1opt1") / metrics.min_pilot_length(b, "x2")
        assert ratio == pytest.approx(39 / 40 * 4 * 10 ** 0.5, rel=0.05)
        assert ratio == pytest.approx(12.6, rel=0.05)

    def test_unit_length(self):
        b = metrics.BudgetInputs(target_nmse_db=0, taps=1)
        assert metrics.min_pilot_length(b, "x1opt1") == 1

    def test_x1opt2_scales_with_par_increase(self):
        b = metrics.BudgetInputs(target_nmse_db=-20, noise_variance=0.5, par_increase=3)
        b1 = metrics.BudgetInputs(target_nmse_db=-20, noise_variance=0.5)
        assert metrics.min_pilot_length(b, "x1opt2") == math.ceil(3 * 100 * 39 * 0.5)
        assert metrics.min_pilot_length(b1, "x1opt2") == metrics.min_pilot_length(b1, "x1opt1")

    @pytest.mark.parametrize("field", ["taps", "ibo", "noise_variance", "beta"])
    def test_positive(self, field):
        with pytest.raises(ParameterError):
            metrics.BudgetInputs(**{field: 0})

    def test_unknown_pilot(self):
        with pytest.raises(ParameterError):
            metrics.min_pilot_length(metrics.BudgetInputs(), "x4")
