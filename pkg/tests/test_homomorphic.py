import math

import numpy as np
import pytest

from sardespeckle import homomorphic, normalize
from sardespeckle.denoise_engines import TvDenoiser
from sardespeckle.errors import ConfigError, InputError
from sardespeckle.image_core import Domain, RasterImage, to_log
from sardespeckle.speckle_stats import simulate_speckle

from conftest import four_region_scene, zero_cnn_weights

EULER_GAMMA = 0.5772156649015329


class TestLogBias:
    def test_single_look(self):
        assert homomorphic.log_bias(1.0) == pytest.approx(-EULER_GAMMA, abs=1e-12)

    def test_decreases_with_looks(self):
        biases = [homomorphic.log_bias(L) for L in (1, 2, 4, 16, 256)]
        assert all(b < 0 for b in biases)
        assert biases == sorted(biases)  # toward zero
        assert abs(homomorphic.log_bias(1e6)) < 1e-6


class TestHomomorphicPipeline:
    def test_oracle_denoiser_recovers_scene(self):
        # a denoiser that outputs the normalized (true log scene + log-speckle
        # mean) makes the pipeline invert exactly back to the scene
        clean = four_region_scene(128)
        L = 1.0
        noisy = simulate_speckle(clean, L, seed=50)
        params = normalize.fit(to_log(noisy), L, None)
        target = to_log(clean).samples.astype(np.float64) + homomorphic.log_bias(L)
        target_norm = normalize.apply(
            RasterImage(target.astype(np.float32), Domain.LOG_INTENSITY), params)

        class Oracle:
            supported_sigmas = "continuous"

            def denoise(self, img, sigma):
                return target_norm

        out = homomorphic.homomorphic_despeckle(noisy, L, Oracle())
        rel = np.abs(out.samples - clean.samples) / clean.samples
        assert rel.max() < 1e-4

    def test_debias_restores_radiometry(self, box_mean_denoiser):
        clean = RasterImage(np.full((512, 512), 100.0, dtype=np.float32))
        noisy = simulate_speckle(clean, 1.0, seed=51)
        debiased = homomorphic.homomorphic_despeckle(noisy, 1.0, box_mean_denoiser)
        biased = homomorphic.homomorphic_despeckle(noisy, 1.0, box_mean_denoiser,
                                                   debias=False)
        m_on = float(debiased.samples.mean())
        m_off = float(biased.samples.mean())
        assert 98.0 <= m_on <= 102.0
        assert 54.0 <= m_off <= 59.0
        # the two outputs differ exactly by the factor e^{-gamma}
        ratio = biased.samples.astype(np.float64) / debiased.samples
        np.testing.assert_allclose(ratio, math.exp(-EULER_GAMMA), rtol=1e-4)

    def test_identity_denoiser_shifts_by_bias(self, identity_denoiser):
        noisy = simulate_speckle(four_region_scene(64), 4.0, seed=52)
        out = homomorphic.homomorphic_despeckle(noisy, 4.0, identity_denoiser)
        expected = noisy.samples.astype(np.float64) * math.exp(-homomorphic.log_bias(4.0))
        np.testing.assert_allclose(out.samples, expected, rtol=1e-4)

    def test_output_positive(self):
        noisy = simulate_speckle(four_region_scene(64), 1.0, seed=53)
        out = homomorphic.homomorphic_despeckle(noisy, 1.0, TvDenoiser())
        assert out.domain == Domain.INTENSITY
        assert (out.samples > 0).all()

    def test_requires_intensity(self, identity_denoiser):
        img = RasterImage(np.ones((64, 64), dtype=np.float32), Domain.AMPLITUDE)
        with pytest.raises(InputError):
            homomorphic.homomorphic_despeckle(img, 1.0, identity_denoiser)


class TestSarCnn:
    def test_zero_residual_applies_bias_only(self):
        L = 1.0
        w = zero_cnn_weights(trained_sigma=30 / 255,
                             trained_bias_term=homomorphic.log_bias(L))
        noisy = simulate_speckle(four_region_scene(64), L, seed=54)
        out = homomorphic.sarcnn_despeckle(noisy, L, w)
        expected = noisy.samples.astype(np.float64) * math.exp(w.trained_bias_term)
        np.testing.assert_allclose(out.samples, expected, rtol=1e-4)

    def test_looks_mismatch_raises(self):
        w = zero_cnn_weights(trained_bias_term=homomorphic.log_bias(1.0))
        noisy = simulate_speckle(four_region_scene(64), 4.0, seed=55)
        with pytest.raises(ConfigError, match="bias"):
            homomorphic.sarcnn_despeckle(noisy, 4.0, w)

    def test_matches_homomorphic_identity_relation(self):
        # a zero-residual network leaves the log image untouched and then adds
        # its baked-in bias term; the non-debiased identity homomorphic
        # pipeline differs from it by exactly that factor
        L = 2.0
        w = zero_cnn_weights(trained_sigma=30 / 255,
                             trained_bias_term=homomorphic.log_bias(L))
        noisy = simulate_speckle(four_region_scene(64), L, seed=56)
        a = homomorphic.sarcnn_despeckle(noisy, L, w)

        class Identity:
            supported_sigmas = (30 / 255,)

            def denoise(self, img, sigma):
                return img

        b = homomorphic.homomorphic_despeckle(noisy, L, Identity(), debias=False)
        np.testing.assert_allclose(
            a.samples, b.samples * math.exp(w.trained_bias_term), rtol=1e-4)
