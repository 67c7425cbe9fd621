"""Homomorphic despeckling: log, normalize, Gaussian-denoise, un-normalize,
debias by digamma(L) - log(L), exponentiate; plus the direct SAR-CNN
inference path whose bias correction is baked into the trained weights.
"""
from __future__ import annotations

import math

import numpy as np

from . import normalize
from .denoise_engines import CnnWeights, TILE_SIZE, _forward_tiled, cnn_forward_array
from .errors import ConfigError
from .image_core import Domain, RasterImage, from_log, to_log
from .speckle_stats import digamma


def log_bias(L: float) -> float:
    """Expected log-speckle value digamma(L) - log(L) (negative for finite L)."""
    return digamma(L) - math.log(L)


def _sigma_grid(denoiser):
    grid = denoiser.supported_sigmas
    return None if grid == "continuous" else tuple(grid)


def homomorphic_despeckle(Y: RasterImage, L: float, denoiser,
                          debias: bool = True) -> RasterImage:
    """Despeckle an intensity image through the homomorphic pipeline.

    debias=False skips the log-bias correction (exposed so the resulting
    radiometric bias, about exp(0.577) for L=1, can be demonstrated).
    """
    Y.require_domain(Domain.INTENSITY)
    y_log = to_log(Y)
    params = normalize.fit(y_log, L, _sigma_grid(denoiser))
    denoised = denoiser.denoise(normalize.apply(y_log, params), params.sigma_train)
    x_log = normalize.unapply(denoised, params).samples.astype(np.float64)
    if debias:
        x_log = x_log - log_bias(L)
    return from_log(RasterImage(x_log.astype(np.float32), Domain.LOG_INTENSITY))


def sarcnn_despeckle(Y: RasterImage, L: float, weights: CnnWeights) -> RasterImage:
    """Single-pass despeckling with a network trained on log SAR images.

    The network predicts the residual on the quantile-normalized log image;
    the residual is mapped back to raw log units, subtracted, and the bias
    term recorded in the weight file (the training-time digamma(L) - log(L))
    is added back.
    """
    Y.require_domain(Domain.INTENSITY)
    bias = log_bias(L)
    if abs(bias - weights.trained_bias_term) > 1e-6:
        raise ConfigError(
            f"weights trained for bias {weights.trained_bias_term:.6f} "
            f"but L={L} implies {bias:.6f}")
    y_log = to_log(Y)
    params = normalize.fit(y_log, L, (weights.trained_sigma,))
    y_norm = normalize.apply(y_log, params).samples.astype(np.float64)
    if max(y_norm.shape) > TILE_SIZE:
        residual = _forward_tiled(weights, y_norm)
    else:
        residual = cnn_forward_array(weights, y_norm)
    # residuals are differences: map back by the pure scale factor
    scale = (params.q_high - params.q_low) / params.gain
    x_log = y_log.samples.astype(np.float64) - residual * scale + weights.trained_bias_term
    return from_log(RasterImage(x_log.astype(np.float32), Domain.LOG_INTENSITY))
