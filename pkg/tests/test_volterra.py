import itertools
import math
import time

import numpy as np
import pytest

from whid import channel, experiments, metrics, volterra
from whid.errors import ConditioningError, ParameterError


def brute_force_indices(L1, L2):
    """Enumerate every (i, j, l, m), sort each lag triple, deduplicate."""
    cubic = {tuple(sorted((i + m, j + m, l + m)))
             for i, j, l in itertools.product(range(L1), repeat=3) for m in range(L2)}
    linear = [(1, (o,)) for o in range(L1 + L2 - 1)]
    return linear + [(3, t) for t in sorted(cubic)]


def brute_force_kernels(h, gamma1, gamma3, g):
    """Sum raw kernels g(m) h(i) h(j) h(l) over every ordered triple."""
    out = {}
    for i in range(len(h)):
        for m in range(len(g)):
            key = (1, (i + m,))
            out[key] = out.get(key, 0.0) + gamma1 * g[m] * h[i]
    for i, j, l in itertools.product(range(len(h)), repeat=3):
        for m in range(len(g)):
            key = (3, tuple(sorted((i + m, j + m, l + m))))
            out[key] = out.get(key, 0.0) + gamma3 * g[m] * h[i] * h[j] * h[l]
    return out


class TestEnumerate:
    def test_reference_count(self):
        t = time.perf_counter()
        idx = volterra.enumerate_reduced_indices(20, 20, 3)
        assert time.perf_counter() - t < 1.0
        assert len(idx) == 5569
        assert sum(k == 3 for k, _ in idx) == 5530

    def test_pre_grouping_multisets(self):
        assert len(list(itertools.combinations_with_replacement(range(20), 3))) == math.comb(22, 3) == 1540

    def test_single_tap(self):
        assert volterra.enumerate_reduced_indices(1, 1) == [(1, (0,)), (3, (0, 0, 0))]

    @pytest.mark.parametrize("L1,L2", [(1, 3), (2, 2), (3, 5), (6, 6), (8, 8), (8, 1), (1, 8)])
    def test_matches_brute_force(self, L1, L2):
        assert volterra.enumerate_reduced_indices(L1, L2) == brute_force_indices(L1, L2)

    def test_canonical_and_idempotent(self):
        a = volterra.enumerate_reduced_indices(5, 4)
        assert a == sorted(a) and len(set(a)) == len(a)
        assert a == volterra.enumerate_reduced_indices(5, 4)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            volterra.enumerate_reduced_indices(0, 3)


class TestDesign:
    def test_linear_column(self):
        np.testing.assert_array_equal(volterra.volterra_design([2.0, 3.0], [(1, (0,))])[:, 0], [2, 3])

    def test_cube(self):
        assert volterra.volterra_design([2.0], [(3, (0, 0, 0))])[0, 0] == 8.0

    def test_zero_prefix(self):
        X = volterra.volterra_design([1.0, 2.0, 3.0], [(1, (2,)), (3, (0, 1, 1))])
        np.testing.assert_array_equal(X[:, 0], [0, 0, 1])
        np.testing.assert_array_equal(X[:, 1], [0, 2 * 1 * 1, 3 * 2 * 2])


class TestKernels:
    def test_trivial(self):
        model = volterra.wh_to_kernels([1.0], {1: 0.7, 3: -0.2}, [1.0])
        assert model.indices == [(1, (0,)), (3, (0, 0, 0))]
        np.testing.assert_allclose(model.kernels, [0.7, -0.2])

    def test_multiplicity(self):
        model = volterra.wh_to_kernels([1.0, 1.0], {1: 0.0, 3: 1.0}, [1.0])
        assert dict(zip(model.indices, model.kernels))[(3, (0, 0, 1))] == pytest.approx(3.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        L1, L2 = rng.integers(1, 6, size=2)
        h, g = rng.standard_normal(L1), rng.standard_normal(L2)
        model = volterra.wh_to_kernels(h, {1: 1.3, 3: -0.4}, g)
        want = brute_force_kernels(h, 1.3, -0.4, g)
        got = dict(zip(model.indices, model.kernels))
        assert set(got) == set(want)
        for key in want:
            assert got[key] == pytest.approx(want[key], abs=1e-12)

    def test_reference_filters_lossless(self):
        h, g = channel.reference_filters()
        amp = channel.PolynomialAmplifier({1: 1.05875, 3: -0.00178733})
        x = np.random.default_rng(0).uniform(-16, 16, 400)
        model = volterra.wh_to_kernels(h, amp, g)
        truth = channel.WhModel(h, amp, g).noiseless(x)
        assert np.linalg.norm(model.predict(x) - truth) <= 1e-8 * np.linalg.norm(truth)

    def test_rejects_fifth_order(self):
        with pytest.raises(ParameterError):
            volterra.wh_to_kernels([1.0], {1: 1.0, 5: 0.1}, [1.0])


class TestEstimate:
    def test_noiseless_recovery(self):
        rng = np.random.default_rng(4)
        truth = channel.WhModel(rng.standard_normal(3), channel.PolynomialAmplifier({1: 1.0, 3: -0.1}),
                                rng.standard_normal(3))
        x = rng.standard_normal(2000)
        est = volterra.estimate_volterra(x, truth.noiseless(x), 3, 3)
        np.testing.assert_allclose(est.kernels, volterra.wh_to_kernels(truth.h, truth.amplifier, truth.g).kernels,
                                   atol=1e-9)
        xv = rng.standard_normal(1000)
        assert metrics.nmse(truth.noiseless(xv), est.predict(xv)) <= -100

    def test_underdetermined(self):
        x = np.random.default_rng(0).standard_normal(100)
        with pytest.raises(ConditioningError):
            volterra.estimate_volterra(x, x, 6, 6)

    def test_ridge_fallback(self):
        x = np.random.default_rng(0).standard_normal(100)
        est = volterra.estimate_volterra(x, x, 6, 6, ridge=1e-6)
        assert len(est.kernels) == 172

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            volterra.estimate_volterra(np.ones(5), np.ones(4), 1, 1)


def test_csv_round_trip(tmp_path):
    model = volterra.wh_to_kernels([1.0, 0.5], {1: 1.0, 3: -0.1}, [1.0, -0.3])
    model.save_csv(tmp_path / "v.csv")
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[0] == "k,a,b,c,value"
    assert lines[1].startswith("1,0,,,")
    back = volterra.VolterraModel.load_csv(tmp_path / "v.csv")
    assert back.indices == model.indices
    np.testing.assert_array_equal(back.kernels, model.kernels)


def test_model_rejects_duplicates():
    with pytest.raises(ParameterError):
        volterra.VolterraModel([(1, (0,)), (1, (0,))], [1.0, 2.0])


class TestRatio:
    def test_reference_constants(self):
        assert volterra.pilot_length_ratio(5569, 39, 10 ** 0.5) == pytest.approx(45.2, abs=0.05)

    def test_unit(self):
        assert volterra.pilot_length_ratio(7, 7, 1) == 1.0

    def test_order_of_magnitude(self):
        assert volterra.pilot_length_ratio(100 * 39, 39, 3) == pytest.approx(33, abs=0.5)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            volterra.pilot_length_ratio(0, 1, 1)


def test_desk_sweep_follows_prediction():
    rows = experiments.volterra_sweep(6, 6, [50.0], 20.0, range(6))
    measured = np.mean([r["nmse"] for r in rows])
    assert abs(measured - rows[0]["predicted"]) <= 3.0
