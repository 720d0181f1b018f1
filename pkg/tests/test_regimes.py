import numpy as np
import pytest

from pa_aware_alloc import PaParams, Regime, classify, distortion_variance, noise_threshold
from pa_aware_alloc.mimo import effective_noise_covariance

from conftest import random_channel


class TestThreshold:
    @pytest.mark.parametrize("n", [1, 3, 8])
    def test_identity_channel(self, pa, n):
        p = 3 * pa.p_sat
        assert noise_threshold(np.eye(n), pa, p) == pytest.approx(
            float(distortion_variance(p, pa)), rel=1e-15)

    def test_zero_channel(self, pa):
        assert noise_threshold(np.zeros((4, 4)), pa, 1.0) == 0.0

    def test_linear_regime(self, pa):
        th = noise_threshold(random_channel(4, 4, 0), pa, 1e-6 * pa.p_sat)
        assert th < 1e-300
        assert classify(1e-30, th).regime is Regime.NOISE_LIMITED

    @pytest.mark.parametrize("seed", range(10))
    def test_trace_identity(self, pa, seed):
        H = random_channel(6, 4, seed)
        p_avg = pa.p_sat * 10 ** np.random.default_rng(seed).uniform(-1, 2)
        sigma = 1e-3
        R = effective_noise_covariance(H, np.full(4, p_avg), pa, sigma)
        trace = np.trace(R).real - 6 * sigma
        assert trace == pytest.approx(6 * noise_threshold(H, pa, p_avg), rel=1e-9)

    def test_scaling(self, pa):
        H = random_channel(4, 4, 1)
        assert noise_threshold(2 * H, pa, pa.p_sat) == pytest.approx(
            4 * noise_threshold(H, pa, pa.p_sat), rel=1e-14)

    def test_monotone(self, pa):
        H = random_channel(4, 4, 2)
        th = [noise_threshold(H, pa, p) for p in np.logspace(-6, 4, 200)]
        assert np.all(np.diff(th) >= 0)

    def test_negative_power(self, pa):
        with pytest.raises(ValueError):
            noise_threshold(np.eye(2), pa, -1.0)


class TestClassify:
    def test_examples(self):
        assert classify(10.0, 1.0, band=1).regime is Regime.NOISE_LIMITED
        assert classify(0.1, 1.0, band=1).regime is Regime.DISTORTION_LIMITED
        assert classify(2.0, 1.0, band=3).regime is Regime.TRANSITION

    def test_ratio(self):
        rep = classify(5.0, 2.0)
        assert rep.ratio == 2.5 and rep.threshold_sigma_n2 == 2.0
        assert classify(1.0, 0.0).ratio == float("inf")

    def test_band_edges(self):
        assert classify(3.0, 1.0).regime is Regime.TRANSITION
        assert classify(3.0 * (1 + 1e-12), 1.0).regime is Regime.NOISE_LIMITED

    @pytest.mark.parametrize("args", [(0.0, 1.0, 3.0), (-1.0, 1.0, 3.0), (1.0, 1.0, 0.5),
                                      (1.0, -1.0, 3.0)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            classify(*args)

    def test_envelope_threshold(self):
        pa = PaParams(10, 1, "envelope")
        assert noise_threshold(np.eye(2), pa, 1e4) == pytest.approx(1 - np.pi / 4, rel=1e-3)
