"""Quantile-based affine normalization of log-intensity images.

A fixed-strength Gaussian denoiser expects inputs in the range it was
trained on. The 0.3% / 99.7% order statistics of the log image are mapped
to [0, 1]; the log-noise standard deviation then becomes
sigma = sqrt(polygamma1(L)) / (q_high - q_low), and the image is further
multiplied by sigma_train / sigma where sigma_train is the largest grid
strength <= sigma (clamped to the smallest grid value when sigma falls
below the grid).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .image_core import Domain, RasterImage, nearest_rank_quantile
from .speckle_stats import polygamma1

#: Noise strengths of the stock 14-network AWGN denoiser family
#: (10/255, 15/255, ..., 75/255).
DNCNN_SIGMA_GRID: tuple[float, ...] = tuple(k / 255.0 for k in range(10, 80, 5))

Q_LOW_P = 0.003
Q_HIGH_P = 0.997
_MIN_SAMPLES = 1000


@dataclass(frozen=True)
class NormalizationParams:
    q_low: float
    q_high: float
    sigma: float
    sigma_train: float
    clamped: bool = False

    @property
    def gain(self) -> float:
        return self.sigma_train / self.sigma


def select_sigma_train(sigma: float, grid: Sequence[float]) -> tuple[float, bool]:
    """Largest grid value <= sigma; clamp to min(grid) (flagged) when below."""
    if not grid:
        raise InputError("sigma grid must be non-empty")
    candidates = [g for g in grid if g <= sigma]
    if candidates:
        return max(candidates), False
    return min(grid), True


def fit(img: RasterImage, L: float,
        grid: Sequence[float] | None = DNCNN_SIGMA_GRID) -> NormalizationParams:
    """Estimate normalization parameters from a log-intensity image.

    grid=None means the downstream denoiser accepts any strength
    (sigma_train = sigma, gain 1).
    """
    img.require_domain(Domain.LOG_INTENSITY)
    if img.samples.size < _MIN_SAMPLES:
        raise InputError(f"need >= {_MIN_SAMPLES} samples to fit quantiles")
    if grid is not None and sorted(grid) != list(grid):
        raise InputError("sigma grid must be ascending")
    flat = np.sort(img.samples.astype(np.float64).ravel())
    q_low = nearest_rank_quantile(flat, Q_LOW_P)
    q_high = nearest_rank_quantile(flat, Q_HIGH_P)
    if q_high <= q_low:
        raise InputError("degenerate image: 0.3% and 99.7% quantiles coincide")
    sigma = math.sqrt(polygamma1(L)) / (q_high - q_low)
    if grid is None:
        sigma_train, clamped = sigma, False
    else:
        sigma_train, clamped = select_sigma_train(sigma, grid)
    return NormalizationParams(q_low=q_low, q_high=q_high, sigma=sigma,
                               sigma_train=sigma_train, clamped=clamped)


def apply(img: RasterImage, params: NormalizationParams) -> RasterImage:
    """x -> gain * (x - q_low) / (q_high - q_low)."""
    img.require_domain(Domain.LOG_INTENSITY)
    scale = params.gain / (params.q_high - params.q_low)
    out = (img.samples.astype(np.float64) - params.q_low) * scale
    return RasterImage(out.astype(np.float32), Domain.LOG_INTENSITY)


def unapply(img: RasterImage, params: NormalizationParams) -> RasterImage:
    """Exact inverse of apply."""
    img.require_domain(Domain.LOG_INTENSITY)
    scale = (params.q_high - params.q_low) / params.gain
    out = img.samples.astype(np.float64) * scale + params.q_low
    return RasterImage(out.astype(np.float32), Domain.LOG_INTENSITY)
