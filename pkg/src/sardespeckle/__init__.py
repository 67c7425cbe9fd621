"""SAR despeckling toolkit: speckle statistics and simulation, homomorphic
and plug-and-play iterative despeckling with pluggable Gaussian denoisers,
a from-scratch CNN inference engine, training-set generation and a
quantitative evaluation harness.
"""

__version__ = "0.1.0"

from .image_core import Domain, RasterImage, from_log, read_raster, to_log, write_raster
from .speckle_stats import (SpeckleModel, digamma, ft_speckle_pdf,
                            gamma_speckle_pdf, polygamma1, simulate_speckle)
from .normalize import DNCNN_SIGMA_GRID, NormalizationParams
from .denoise_engines import (CnnDenoiser, CnnWeights, TvDenoiser, cnn_denoiser,
                              cnn_forward, load_weights, save_weights, tv_denoise)
from .homomorphic import homomorphic_despeckle, sarcnn_despeckle
from .mulog import mulog_despeckle, prox_data
from .metrics import enl, evaluate_suite, psnr, ratio_residual, ssim

__all__ = [
    "__version__",
    "Domain", "RasterImage", "from_log", "read_raster", "to_log", "write_raster",
    "SpeckleModel", "digamma", "ft_speckle_pdf", "gamma_speckle_pdf",
    "polygamma1", "simulate_speckle",
    "DNCNN_SIGMA_GRID", "NormalizationParams",
    "CnnDenoiser", "CnnWeights", "TvDenoiser", "cnn_denoiser", "cnn_forward",
    "load_weights", "save_weights", "tv_denoise",
    "homomorphic_despeckle", "sarcnn_despeckle",
    "mulog_despeckle", "prox_data",
    "enl", "evaluate_suite", "psnr", "ratio_residual", "ssim",
]
