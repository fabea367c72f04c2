import warnings

import numpy as np
import pytest

from z3ro_sim.analysis import (
    bussgang_analysis,
    bussgang_gain,
    distortion_variance,
    draw_symbols,
    rate,
    received_noiseless,
    sndr,
    to_db,
)
from z3ro_sim.channel import ChannelSet, UserChannel, synth_rayleigh
from z3ro_sim.errors import InconsistencyError, SingularityError, ValidationError
from z3ro_sim.pa import Ideal, Polynomial3, Rapp
from z3ro_sim.precoding import mrt_weights, z3ro_weights

from .conftest import random_channel
from .oracles import complex_gaussian_moment, received_loop


def small_ensemble(k, n, p, seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return draw_symbols(k, n, p, seed)


class TestDrawSymbols:
    def test_variance(self):
        e = draw_symbols(1, 1_000_000, 0.5, 1)
        assert 0.4975 <= e.empirical_power[0] <= 0.5025

    def test_deterministic(self):
        a, b = draw_symbols(2, 20_000, [1.0, 2.0], 5), draw_symbols(2, 20_000, [1.0, 2.0], 5)
        assert a.symbols.tobytes() == b.symbols.tobytes()

    def test_task_seeds_differ(self):
        a, b = draw_symbols(1, 20_000, 1.0, (3, 0)), draw_symbols(1, 20_000, 1.0, (3, 1))
        assert not np.array_equal(a.symbols, b.symbols)

    def test_uncorrelated(self):
        e = draw_symbols(2, 100_000, [0.3, 0.7], 9)
        s = e.symbols
        corr = np.mean(s[:, 0] * s[:, 1].conj())
        assert abs(corr) < 0.01 * np.sqrt(0.3 * 0.7)

    def test_circular(self):
        s = draw_symbols(1, 200_000, 1.0, 4).symbols[:, 0]
        assert abs(np.mean(s * s)) < 5 / np.sqrt(s.size)

    def test_power_within_bound(self):
        n = 50_000
        e = draw_symbols(3, n, [0.1, 1.0, 10.0], 2)
        rel = np.abs(e.empirical_power / np.array([0.1, 1.0, 10.0]) - 1)
        assert np.all(rel < 5 / np.sqrt(n))

    def test_invalid_power(self):
        with pytest.raises(ValidationError):
            draw_symbols(2, 20_000, [1.0, 0.0], 1)

    def test_small_ensemble_warns(self):
        with pytest.warns(UserWarning):
            draw_symbols(1, 100, 1.0, 1)


class TestReceived:
    def test_ideal_linear(self, rng):
        h = synth_rayleigh(6, 3, 1)
        w = mrt_weights([UserChannel(h.gains[:, 0])])
        e = draw_symbols(1, 20_000, 0.7, 2)
        r = received_noiseless(h, w, Ideal(), e)
        expected = e.symbols[:, :1] * (h.gains.T @ w.weights[:, 0])[None, :]
        assert np.max(np.abs(r - expected)) < 1e-12

    def test_polynomial_single_antenna(self):
        pa = Polynomial3(1.0, -0.07)
        w = mrt_weights([UserChannel([1.0])])
        e = small_ensemble(1, 500, 1.0, 3)
        r = received_noiseless(np.ones((1, 1)), w, pa, e)[:, 0]
        s = e.symbols[:, 0]
        np.testing.assert_allclose(r, s - 0.07 * s * np.abs(s) ** 2, atol=1e-14)

    @pytest.mark.parametrize("pa", [Rapp(0.5, 2.0), Polynomial3(1.0, -0.1j), Ideal()])
    def test_against_loop(self, rng, pa):
        h = synth_rayleigh(3, 2, 8)
        w = z3ro_weights([UserChannel(random_channel(rng, 3)), UserChannel(random_channel(rng, 3))], 1)
        e = small_ensemble(2, 100, [0.4, 0.6], 4)
        r = received_noiseless(h, w, pa, e)
        assert np.max(np.abs(r - received_loop(h.gains, w.weights, pa, e.symbols))) < 1e-12

    def test_dimension_mismatch(self):
        w = mrt_weights([UserChannel(np.ones(4))])
        with pytest.raises(ValidationError):
            received_noiseless(np.ones((3, 2)), w, Ideal(), draw_symbols(1, 20_000, 1.0, 0))
        with pytest.raises(ValidationError):
            received_noiseless(np.ones((4, 2)), w, Ideal(), draw_symbols(2, 20_000, 1.0, 0))


class TestBussgangGain:
    def test_ideal_closed_form(self, rng):
        h = random_channel(rng, 8)
        w = mrt_weights([UserChannel(h)])
        e = draw_symbols(1, 100_000, 0.5, 1)
        r = received_noiseless(h, w, Ideal(), e)[:, 0]
        g = bussgang_gain(r, e.symbols[:, 0], e.empirical_power[0])
        beam = np.sum(h * w.weights[:, 0])
        assert abs(g - beam) <= 3 / np.sqrt(e.size) * abs(beam)

    def test_polynomial_oracle(self):
        p, a3 = 0.8, -0.05
        moment = complex_gaussian_moment(p, 2)
        assert moment == pytest.approx(2 * p * p, rel=1e-9)
        e = draw_symbols(1, 400_000, p, 17)
        s = e.symbols[:, 0]
        r = Polynomial3(1.0, a3)(s)
        g = bussgang_gain(r, s, p)
        se = np.std(r * s.conj()) / np.sqrt(s.size) / p
        assert abs(g - (1 + a3 * moment / p)) < 3 * se

    def test_uncorrelated(self):
        n = 100_000
        r = draw_symbols(1, n, 1.0, 1).symbols[:, 0]
        s = draw_symbols(1, n, 1.0, 2).symbols[:, 0]
        assert abs(bussgang_gain(r, s, 1.0)) < 5 / np.sqrt(n)

    def test_errors(self):
        with pytest.raises(ValidationError):
            bussgang_gain(np.array([]), np.array([]), 1.0)
        with pytest.raises(ValidationError):
            bussgang_gain(np.ones(3), np.ones(4), 1.0)


class TestDistortionVariance:
    def test_ideal_no_distortion(self, rng):
        h = random_channel(rng, 8)
        w = mrt_weights([UserChannel(h)])
        e = draw_symbols(1, 1_000_000, 1.0, 2)
        r = received_noiseless(h, w, Ideal(), e)[:, 0]
        p = e.empirical_power[0]
        g = bussgang_gain(r, e.symbols[:, 0], p)
        assert distortion_variance(r, g, p) < 1e-3 * abs(g) ** 2 * p

    def test_z3ro_null_at_user(self, rng):
        h = random_channel(rng, 8)
        e = draw_symbols(1, 1_000_000, 0.5, 3)
        s, p = e.symbols[:, 0], e.empirical_power[0]
        levels = []
        for w in (mrt_weights([UserChannel(h)]), z3ro_weights([UserChannel(h)], 2)):
            r = received_noiseless(h, w, Polynomial3(1.0, -0.05), e)[:, 0]
            levels.append(distortion_variance(r, bussgang_gain(r, s, p), p))
        assert to_db(levels[1]) <= to_db(levels[0]) - 30

    def test_two_user_interference(self, rng):
        hs = synth_rayleigh(16, 2, 21)
        w = mrt_weights([UserChannel(hs.gains[:, 0]), UserChannel(hs.gains[:, 1])])
        e = draw_symbols(2, 200_000, [0.4, 0.6], 5)
        res = bussgang_analysis(hs, w, Ideal(), e)
        leak = hs.gains.T @ w.weights  # leak[l, k] = sum_m h[m, l] w[m, k]
        # user 1 at its own location sees user 0's beam, and vice versa
        expected_1 = abs(leak[1, 0]) ** 2 * 0.4
        expected_0 = abs(leak[1, 1]) ** 2 * 0.6
        tol = 5 / np.sqrt(e.size)
        assert res.distortion_var[1, 1] == pytest.approx(expected_1, rel=tol)
        assert res.distortion_var[1, 0] == pytest.approx(expected_0, rel=tol)
        # the joint projection removes both users' linear parts
        assert res.total_distortion_var[1] < 1e-10 * res.received_var[1]

    def test_clamp_and_inconsistency(self):
        r = np.ones(10_000)
        assert distortion_variance(r, 1.0 + 1e-4, 1.0) == 0.0
        with pytest.raises(InconsistencyError):
            distortion_variance(r, 2.0, 1.0)

    def test_noise_term(self):
        rng = np.random.default_rng(0)
        n = 200_000
        s = draw_symbols(1, n, 1.0, 1).symbols[:, 0]
        v = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(0.1 / 2)
        r = 2 * s + v
        p = np.mean(np.abs(s) ** 2)
        g = bussgang_gain(r, s, p)
        assert abs(distortion_variance(r, g, p, noise_var=0.1)) < 5 * 0.1 / np.sqrt(n) + 1e-3


class TestSndrRate:
    @pytest.mark.parametrize("args,expected", [((1.0, 0.0, 0.1), 10.0), ((1.0, 0.1, 0.0), 10.0), ((0.0, 0.1, 0.1), 0.0)])
    def test_sndr(self, args, expected):
        assert sndr(*args) == pytest.approx(expected)

    def test_sndr_singular(self):
        with pytest.raises(SingularityError):
            sndr(1.0, 0.0, 0.0)

    @pytest.mark.parametrize("x,expected", [(0, 0), (1, 1), (3, 2)])
    def test_rate(self, x, expected):
        assert rate(x) == expected

    def test_rate_negative(self):
        with pytest.raises(ValidationError):
            rate(-0.5)

    def test_db(self):
        assert to_db(100.0) == pytest.approx(20.0)
        assert to_db(0.0) == -np.inf


class TestEstimatorProperties:
    @pytest.fixture
    def scene(self, rng):
        hs = synth_rayleigh(12, 5, 4)
        w = z3ro_weights([UserChannel(hs.gains[:, 2])], 2)
        e = draw_symbols(1, 50_000, 0.5, 6)
        return hs, w, e

    def test_orthogonality(self, scene):
        hs, w, e = scene
        r = received_noiseless(hs, w, Rapp(1.0, 2.0), e)
        s, p = e.symbols[:, 0], e.empirical_power[0]
        for li in range(hs.location_count):
            g = bussgang_gain(r[:, li], s, p)
            d = r[:, li] - g * s
            bound = 5 / np.sqrt(e.size) * np.sqrt(np.mean(np.abs(d) ** 2) * p)
            assert abs(np.mean(d * s.conj())) < bound

    def test_power_accounting(self, scene):
        hs, w, e = scene
        res = bussgang_analysis(hs, w, Rapp(1.0, 2.0), e)
        raw = res.received_var - res.signal_var[:, 0]
        np.testing.assert_allclose(res.distortion_var[:, 0], np.maximum(raw, 0), rtol=0, atol=1e-12)
        assert np.all(raw >= 0)

    def test_streaming_matches_direct(self, scene):
        hs, w, e = scene
        pa = Rapp(1.0, 2.0)
        r = received_noiseless(hs, w, pa, e)
        s, p = e.symbols[:, 0], e.empirical_power[0]
        for chunk in (1000, 4096, 50_000):
            res = bussgang_analysis(hs, w, pa, e, chunk_size=chunk)
            for li in range(hs.location_count):
                g = bussgang_gain(r[:, li], s, p)
                assert res.gain[li, 0] == pytest.approx(g, rel=1e-12)
                assert res.distortion_var[li, 0] == pytest.approx(distortion_variance(r[:, li], g, p), rel=1e-9)

    def test_scaling_covariance(self, scene):
        hs, w, e = scene
        c = 3.7
        scaled = ChannelSet(hs.gains * c)
        a = bussgang_analysis(hs, w, Rapp(1.0, 2.0), e)
        b = bussgang_analysis(scaled, w, Rapp(1.0, 2.0), e)
        np.testing.assert_allclose(b.signal_var, c**2 * a.signal_var, rtol=1e-9)
        np.testing.assert_allclose(b.distortion_var, c**2 * a.distortion_var, rtol=1e-9)

    def test_linear_consistency(self, rng):
        h = random_channel(rng, 16)
        w = mrt_weights([UserChannel(h)])
        e = draw_symbols(1, 100_000, 0.5, 7)
        res = bussgang_analysis(h, w, Ideal(), e, noise_var=0.2)
        beam = np.sum(h * w.weights[:, 0])
        assert res.sndr(0, 0) == pytest.approx(abs(beam) ** 2 * 0.5 / 0.2, rel=0.01)

    def test_monte_carlo_convergence(self, rng):
        h = random_channel(rng, 4)
        w = mrt_weights([UserChannel(h)])

        def spread(n):
            est = []
            for seed in range(200):
                e = small_ensemble(1, n, 0.5, (99, seed))
                est.append(bussgang_analysis(h, w, Rapp(1.0, 2.0), e).distortion_var[0, 0])
            return np.std(est)

        ratio = spread(4000) / spread(8000)
        assert 1.25 <= ratio <= 1.6
