import numpy as np
import pytest

import sardespeckle as sd
from sardespeckle import denoise_engines as de


class IdentityDenoiser:
    supported_sigmas = "continuous"

    def denoise(self, img, sigma):
        return img


class BoxMeanDenoiser:
    """Local-mean smoother over a (2*half+1)^2 window, reflect boundary."""

    supported_sigmas = "continuous"

    def __init__(self, half=10):
        self.half = half

    def denoise(self, img, sigma):
        x = img.samples.astype(np.float64)
        k = 2 * self.half + 1
        xp = np.pad(x, self.half, mode="reflect")
        c = np.cumsum(np.cumsum(xp, axis=0), axis=1)
        c = np.pad(c, ((1, 0), (1, 0)))
        out = (c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]) / (k * k)
        return sd.RasterImage(out.astype(np.float32), img.domain)


def four_region_scene(size=256):
    """Piecewise-constant reflectivity with >= 6 dB contrasts between regions."""
    half = size // 2
    x = np.full((size, size), 50.0, dtype=np.float32)
    x[:half, :half] = 200.0
    x[half:, half:] = 800.0
    x[:half, half:] = 12.5
    return sd.RasterImage(x)


def random_cnn_weights(channels, seed=0, scale=0.05, trained_sigma=25 / 255,
                       trained_bias_term=0.0):
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(len(channels) - 1):
        kind = de.LayerKind.CONV if i == len(channels) - 2 else de.LayerKind.CONV_RELU
        layers.append(de.LayerSpec(
            kind, channels[i], channels[i + 1],
            rng.standard_normal((channels[i + 1], channels[i], 3, 3)) * scale,
            rng.standard_normal(channels[i + 1]) * 0.01))
    return de.CnnWeights(tuple(layers), trained_sigma, trained_bias_term)


def zero_cnn_weights(depth=3, channels=4, trained_sigma=25 / 255,
                     trained_bias_term=0.0):
    chs = [1] + [channels] * (depth - 1) + [1]
    layers = []
    for i in range(len(chs) - 1):
        kind = de.LayerKind.CONV if i == len(chs) - 2 else de.LayerKind.CONV_RELU
        layers.append(de.LayerSpec(kind, chs[i], chs[i + 1],
                                   np.zeros((chs[i + 1], chs[i], 3, 3)),
                                   np.zeros(chs[i + 1])))
    return de.CnnWeights(tuple(layers), trained_sigma, trained_bias_term)


def identity_chain_weights(depth=3, channels=4):
    """Center-tap pass-through chain: residual equals the (non-negative) input."""
    chs = [1] + [channels] * (depth - 1) + [1]
    layers = []
    for i in range(len(chs) - 1):
        kind = de.LayerKind.CONV if i == len(chs) - 2 else de.LayerKind.CONV_RELU
        k = np.zeros((chs[i + 1], chs[i], 3, 3))
        k[0, 0, 1, 1] = 1.0
        layers.append(de.LayerSpec(kind, chs[i], chs[i + 1], k, np.zeros(chs[i + 1])))
    return de.CnnWeights(tuple(layers), 25 / 255, 0.0)


@pytest.fixture
def identity_denoiser():
    return IdentityDenoiser()


@pytest.fixture
def box_mean_denoiser():
    return BoxMeanDenoiser()
