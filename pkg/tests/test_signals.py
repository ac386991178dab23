import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from whid import signals
from whid.errors import DegenerateError, ParameterError


def spec(M, f1, phases=None, N=None, k0=1):
    phases = np.zeros(M) if phases is None else phases
    return signals.MultisineSpec(M, f1, phases, N or int(round(1 / f1)), k0)


class TestMultisine:
    def test_quarter_rate_cosine(self):
        x = signals.multisine(spec(1, 0.25, [0.0], 4))
        np.testing.assert_allclose(x, [1, 0, -1, 0], atol=1e-12)

    def test_in_phase_sum_at_origin(self):
        assert signals.multisine(spec(2, 0.1, [0.0, 0.0], 1))[0] == pytest.approx(2.0)

    def test_schroeder_par_about_6db(self):
        x = signals.multisine(spec(100, 1 / 200, signals.schroeder_phases(100), 200))
        assert signals.par_db(x) == pytest.approx(6.0, abs=0.5)

    def test_first_harmonic_shifts_band(self):
        s = spec(10, 1 / 100, k0=5)
        assert s.band == pytest.approx((0.05, 0.14))
        mag = np.abs(np.fft.rfft(signals.multisine(s)))
        assert set(np.flatnonzero(mag > 1e-6)) == set(range(5, 15))

    def test_nyquist_guard(self):
        with pytest.raises(ParameterError):
            spec(60, 1 / 100)

    @pytest.mark.parametrize("kwargs", [
        dict(num_harmonics=0, fundamental=0.1, phases=[], length=10),
        dict(num_harmonics=2, fundamental=0.1, phases=[0.0], length=10),
        dict(num_harmonics=1, fundamental=0.1, phases=[0.0], length=0),
        dict(num_harmonics=1, fundamental=0.0, phases=[0.0], length=10),
    ])
    def test_invalid_specs(self, kwargs):
        with pytest.raises(ParameterError):
            signals.MultisineSpec(**kwargs)


class TestSchroeder:
    def test_against_scalar_formula(self):
        # independent oracle: float floor of k^2 / 2M, reduced mod 2 pi
        for M in (1, 2, 7, 100, 1000):
            want = np.array([(math.pi * math.floor(k * k / (2 * M))) % (2 * math.pi)
                             for k in range(1, M + 1)])
            # compare on the circle: float mod can land just below 2 pi
            diff = np.angle(np.exp(1j * (signals.schroeder_phases(M) - want)))
            np.testing.assert_allclose(diff, 0.0, atol=1e-9)

    def test_listed_values(self):
        p = signals.schroeder_phases(100)
        assert p[0] == 0.0 and p[19] == 0.0 and p[20] == 0.0
        assert signals.schroeder_phases(2)[1] == pytest.approx(math.pi)

    @given(st.integers(1, 2000))
    def test_values_are_zero_or_pi(self, M):
        p = signals.schroeder_phases(M)
        assert np.all((p == 0.0) | (p == math.pi))


class TestPar:
    def test_constant(self):
        assert signals.par(np.full(7, 3.0)) == pytest.approx(1.0)

    def test_cosine(self):
        x = np.cos(2 * np.pi * np.arange(64) / 16)
        assert signals.par(x) == pytest.approx(2.0)
        assert signals.par_db(x) == pytest.approx(3.0103, abs=1e-4)

    def test_zero_signal(self):
        with pytest.raises(DegenerateError):
            signals.par(np.zeros(5))

    @given(st.floats(1e-3, 1e3), st.floats(-1e3, -1e-3))
    def test_scale_invariance(self, a, b):
        x = signals.multisine(spec(20, 1 / 64, signals.schroeder_phases(20), 64))
        assert signals.par(a * x) == pytest.approx(signals.par(x), rel=1e-12)
        assert signals.par(b * x) == pytest.approx(signals.par(x), rel=1e-12)

    def test_scale_to_peak(self):
        y = signals.scale_to_peak(np.array([1.0, -4.0, 2.0]), 16.0)
        assert np.max(np.abs(y)) == pytest.approx(16.0)


class TestPhaseSearch:
    def test_zero_budget_returns_seed(self):
        res = signals.minmax_phase_search(40, 20, 1 / 100, 100, budget=0)
        np.testing.assert_array_equal(res.phases, signals.schroeder_phases(40))
        assert res.objective == res.seed_objective and res.evaluations == 0

    def test_single_signal_case_not_worse(self):
        res = signals.minmax_phase_search(30, 30, 1 / 80, 80, budget=500, seed=3)
        assert res.objective <= res.seed_objective

    def test_objective_matches_direct_evaluation(self):
        res = signals.minmax_phase_search(40, 20, 1 / 100, 100, budget=640, seed=1)
        direct = max(
            signals.par(signals.multisine(spec(j, 1 / 100, res.phases[:j], 100)))
            for j in range(20, 41)
        )
        assert res.objective == pytest.approx(direct, rel=1e-10)

    def test_deterministic(self):
        a = signals.minmax_phase_search(40, 20, 1 / 100, 100, budget=320, seed=9)
        b = signals.minmax_phase_search(40, 20, 1 / 100, 100, budget=320, seed=9)
        np.testing.assert_array_equal(a.phases, b.phases)
        assert a.trace == b.trace

    def test_budget_respected(self):
        res = signals.minmax_phase_search(40, 20, 1 / 100, 100, budget=100, seed=0)
        assert res.evaluations <= 100

    @pytest.mark.slow
    def test_improves_on_seed_most_of_the_time(self):
        wins = sum(
            signals.minmax_phase_search(40, 20, 1 / 100, 100, budget=10_000, seed=s).objective
            < signals.minmax_phase_search(40, 20, 1 / 100, 100, budget=0).objective
            for s in range(50)
        )
        assert wins >= 45

    def test_bad_bounds(self):
        with pytest.raises(ParameterError):
            signals.minmax_phase_search(10, 11, 0.01, 100, 10)


class TestWhiteNoise:
    def test_power_matches(self):
        x = signals.matched_white_noise(np.ones(10), 100_000, seed=0)
        assert 0.99 <= signals.mean_power(x) <= 1.01

    def test_deterministic(self):
        ref = np.arange(5.0)
        np.testing.assert_array_equal(
            signals.matched_white_noise(ref, 50, 7), signals.matched_white_noise(ref, 50, 7)
        )

    def test_zero_reference(self):
        assert not np.any(signals.matched_white_noise(np.zeros(4), 20, 1))


class TestOccupiedBandwidth:
    def test_pure_cosine_is_one_bin(self):
        N = 256
        x = np.cos(2 * np.pi * 10 * np.arange(N) / N)
        assert signals.occupied_bandwidth(x) == pytest.approx(1 / N)

    def test_white_noise_fills_band(self):
        for s in range(10):
            x = np.random.default_rng(s).standard_normal(2**16)
            assert signals.occupied_bandwidth(x, -20) / 0.5 >= 0.95

    def test_multisine_support(self):
        M, P = 20, 200
        x = signals.multisine(spec(M, 1 / P, signals.schroeder_phases(M), P))
        assert signals.occupied_bandwidth(x) == pytest.approx((M - 1) / P + 1 / P)


class TestFiles:
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
    @settings(max_examples=30)
    def test_csv_round_trip(self, tmp_path_factory, values):
        path = tmp_path_factory.mktemp("sig") / "x.csv"
        signals.save_signal_csv(path, values)
        np.testing.assert_array_equal(signals.load_signal_csv(path), values)

    def test_bin_round_trip(self, tmp_path):
        x = np.random.default_rng(0).standard_normal(1000)
        signals.save_signal_bin(tmp_path / "x.bin", x)
        np.testing.assert_array_equal(signals.load_signal_bin(tmp_path / "x.bin"), x)

    def test_bin_rejects_garbage(self, tmp_path):
        (tmp_path / "bad.bin").write_bytes(b"nope" * 8)
        with pytest.raises(ParameterError):
            signals.load_signal_bin(tmp_path / "bad.bin")

    def test_bin_truncated(self, tmp_path):
        signals.save_signal_bin(tmp_path / "x.bin", np.ones(10))
        data = (tmp_path / "x.bin").read_bytes()
        (tmp_path / "x.bin").write_bytes(data[:-8])
        with pytest.raises(ParameterError):
            signals.load_signal_bin(tmp_path / "x.bin")

    def test_signal_rejects_nan(self):
        with pytest.raises(ParameterError):
            signals.Signal([1.0, float("nan")])
