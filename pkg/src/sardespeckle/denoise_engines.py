"""Gaussian denoiser engines: total-variation (Chambolle dual projection)
and a feed-forward inference engine for DnCNN-shaped residual networks.

Both engines implement the GaussianDenoiser protocol: ``denoise(img, sigma)``
plus a ``supported_sigmas`` attribute that is either the string
``"continuous"`` or an explicit grid of strengths.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from . import kernels
from .errors import ConfigError, InputError, ParseError
from .image_core import Domain, RasterImage

_SCNW_MAGIC = b"SCNW"
_SCNW_VERSION = 1
_BN_EPS = 1e-5

TV_STEP = 0.248
TV_MAX_ITERS = 300
TV_GAP_RTOL = 1e-4
TV_LAMBDA_FACTOR = 1.5

TILE_SIZE = 256
TILE_MARGIN = 19  # receptive-field radius of the 19-layer network


@runtime_checkable
class GaussianDenoiser(Protocol):
    supported_sigmas: str | Sequence[float]

    def denoise(self, img: RasterImage, sigma: float) -> RasterImage: ...


# ---------------------------------------------------------------------------
# Total variation
# ---------------------------------------------------------------------------

def _grad(u):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:-1, :] = u[1:, :] - u[:-1, :]
    gy[:, :-1] = u[:, 1:] - u[:, :-1]
    return gx, gy


def _div(p1, p2):
    d = np.zeros_like(p1)
    d[0, :] = p1[0, :]
    d[1:-1, :] = p1[1:-1, :] - p1[:-2, :]
    d[-1, :] = -p1[-2, :]
    d2 = np.zeros_like(p2)
    d2[:, 0] = p2[:, 0]
    d2[:, 1:-1] = p2[:, 1:-1] - p2[:, :-2]
    d2[:, -1] = -p2[:, -2]
    return d + d2


def tv_denoise_array(y: np.ndarray, lam: float, step: float = TV_STEP,
                     max_iters: int = TV_MAX_ITERS,
                     gap_rtol: float = TV_GAP_RTOL) -> np.ndarray:
    """Isotropic ROF solve min_u 0.5||u-y||^2 + lam*TV(u) on a float64 array.

    Chambolle's dual projection with fixed step; stops when the duality gap
    drops below gap_rtol * ||y||^2.
    """
    y = np.asarray(y, dtype=np.float64)
    if lam <= 0.0:
        return y.copy()
    p1 = np.zeros_like(y)
    p2 = np.zeros_like(y)
    sq_y = float(np.sum(y * y))
    gap_tol = gap_rtol * sq_y
    for it in range(max_iters):
        gx, gy = _grad(_div(p1, p2) - y / lam)
        mag = np.sqrt(gx * gx + gy * gy)
        denom = 1.0 + step * mag
        p1 = (p1 + step * gx) / denom
        p2 = (p2 + step * gy) / denom
        if (it + 1) % 10 == 0 or it == max_iters - 1:
            u = y - lam * _div(p1, p2)
            ux, uy = _grad(u)
            tv = float(np.sum(np.sqrt(ux * ux + uy * uy)))
            primal = 0.5 * float(np.sum((u - y) ** 2)) + lam * tv
            dual = 0.5 * sq_y - 0.5 * float(np.sum(u * u))
            if primal - dual <= gap_tol:
                break
    return y - lam * _div(p1, p2)


def tv_denoise(img: RasterImage, sigma: float, lam: float | None = None,
               max_iters: int = TV_MAX_ITERS) -> RasterImage:
    """TV denoising with lam = 1.5 * sigma unless overridden."""
    if sigma <= 0.0:
        raise InputError("sigma must be positive")
    if lam is None:
        lam = TV_LAMBDA_FACTOR * sigma
    out = tv_denoise_array(img.samples.astype(np.float64), lam, max_iters=max_iters)
    return RasterImage(out.astype(np.float32), img.domain)


class TvDenoiser:
    """GaussianDenoiser backed by the Chambolle TV solver (any strength)."""

    supported_sigmas = "continuous"

    def __init__(self, lam_factor: float = TV_LAMBDA_FACTOR,
                 max_iters: int = TV_MAX_ITERS):
        self.lam_factor = lam_factor
        self.max_iters = max_iters

    def denoise(self, img: RasterImage, sigma: float) -> RasterImage:
        return tv_denoise(img, sigma, lam=self.lam_factor * sigma,
                          max_iters=self.max_iters)


# ---------------------------------------------------------------------------
# CNN inference engine
# ---------------------------------------------------------------------------

class LayerKind(enum.IntEnum):
    CONV_RELU = 0
    CONV_BN_RELU = 1  # batch norm folded into kernel/bias at load time
    CONV = 2


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    in_channels: int
    out_channels: int
    kernel: np.ndarray  # (out, in, 3, 3) float64
    bias: np.ndarray  # (out,) float64

    @property
    def has_relu(self) -> bool:
        return self.kind != LayerKind.CONV


@dataclass(frozen=True)
class CnnWeights:
    layers: tuple[LayerSpec, ...]
    trained_sigma: float
    trained_bias_term: float

    def __post_init__(self):
        if len(self.layers) < 3:
            raise ParseError(f"need >= 3 layers, got {len(self.layers)}")
        if self.layers[0].in_channels != 1:
            raise ParseError("first layer must take a single channel")
        last = self.layers[-1]
        if last.out_channels != 1 or last.kind != LayerKind.CONV:
            raise ParseError("last layer must be a plain conv producing one channel")
        for i in range(1, len(self.layers)):
            prev, cur = self.layers[i - 1], self.layers[i]
            if cur.in_channels != prev.out_channels:
                raise ParseError(
                    f"channel chain broken between layers {i} and {i + 1}: "
                    f"{prev.out_channels} -> {cur.in_channels}")

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def receptive_radius(self) -> int:
        return len(self.layers)


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ParseError(f"{self.path}: truncated tensor data")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]

    def f32(self) -> float:
        return struct.unpack("<f", self.take(4))[0]

    def f32_array(self, *shape) -> np.ndarray:
        n = int(np.prod(shape))
        return np.frombuffer(self.take(4 * n), dtype="<f4").reshape(shape).astype(np.float64)


def load_weights(path) -> CnnWeights:
    """Parse an SCNW file, folding batch-norm parameters into kernel and bias."""
    data = Path(path).read_bytes()
    r = _Reader(data, path)
    if r.take(4) != _SCNW_MAGIC:
        raise ParseError(f"{path}: bad magic")
    version = r.u32()
    if version != _SCNW_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    trained_sigma = r.f32()
    trained_bias_term = r.f32()
    layer_count = r.u32()
    if layer_count == 0 or layer_count > 1024:
        raise ParseError(f"{path}: unreasonable layer count {layer_count}")
    layers = []
    for _ in range(layer_count):
        kind_tag = r.u8()
        try:
            kind = LayerKind(kind_tag)
        except ValueError:
            raise ParseError(f"{path}: unknown layer kind {kind_tag}") from None
        in_ch = r.u32()
        out_ch = r.u32()
        if in_ch == 0 or out_ch == 0 or in_ch > 4096 or out_ch > 4096:
            raise ParseError(f"{path}: unreasonable channel count {in_ch}x{out_ch}")
        kernel = r.f32_array(out_ch, in_ch, 3, 3)
        bias = r.f32_array(out_ch)
        if kind == LayerKind.CONV_BN_RELU:
            gamma = r.f32_array(out_ch)
            beta = r.f32_array(out_ch)
            mu = r.f32_array(out_ch)
            var = r.f32_array(out_ch)
            scale = gamma / np.sqrt(var + _BN_EPS)
            kernel = kernel * scale[:, None, None, None]
            bias = scale * (bias - mu) + beta
        layers.append(LayerSpec(kind, in_ch, out_ch, kernel, bias))
    if r.pos != len(data):
        raise ParseError(f"{path}: {len(data) - r.pos} trailing bytes")
    return CnnWeights(tuple(layers), trained_sigma, trained_bias_term)


def save_weights(weights: CnnWeights, path) -> None:
    """Write SCNW. Folded BN layers are stored as plain conv+ReLU (kind 0)."""
    buf = bytearray()
    buf += _SCNW_MAGIC
    buf += struct.pack("<IffI", _SCNW_VERSION, weights.trained_sigma,
                       weights.trained_bias_term, len(weights.layers))
    for layer in weights.layers:
        kind = LayerKind.CONV_RELU if layer.kind == LayerKind.CONV_BN_RELU else layer.kind
        buf += struct.pack("<BII", int(kind), layer.in_channels, layer.out_channels)
        buf += layer.kernel.astype("<f4").tobytes()
        buf += layer.bias.astype("<f4").tobytes()
    Path(path).write_bytes(bytes(buf))


def cnn_forward(weights: CnnWeights, img: RasterImage) -> RasterImage:
    """Run the layer stack on a single-channel image; returns the residual."""
    residual = cnn_forward_array(weights, img.samples.astype(np.float64))
    return RasterImage(residual.astype(np.float32), img.domain)


def cnn_forward_array(weights: CnnWeights, arr: np.ndarray) -> np.ndarray:
    x = np.asarray(arr, dtype=np.float64)[None, :, :]
    for layer in weights.layers:
        x = kernels.conv3x3(x, layer.kernel, layer.bias)
        if layer.has_relu:
            np.maximum(x, 0.0, out=x)
    return x[0]


def _forward_tiled(weights: CnnWeights, arr: np.ndarray,
                   tile: int = TILE_SIZE, margin: int | None = None) -> np.ndarray:
    if margin is None:
        margin = max(TILE_MARGIN, weights.receptive_radius)
    h, w = arr.shape
    out = np.empty_like(arr)
    for r0 in range(0, h, tile):
        r1 = min(r0 + tile, h)
        for c0 in range(0, w, tile):
            c1 = min(c0 + tile, w)
            rr0, cc0 = max(0, r0 - margin), max(0, c0 - margin)
            rr1, cc1 = min(h, r1 + margin), min(w, c1 + margin)
            block = cnn_forward_array(weights, arr[rr0:rr1, cc0:cc1])
            out[r0:r1, c0:c1] = block[r0 - rr0:r1 - rr0, c0 - cc0:c1 - cc0]
    return out


class CnnDenoiser:
    """GaussianDenoiser wrapping a residual network at its trained strength.

    Inputs larger than the tile size are processed in 256x256 tiles with an
    overlap margin covering the receptive field, then center-cropped.
    """

    def __init__(self, weights: CnnWeights, tile: int = TILE_SIZE):
        self.weights = weights
        self.tile = tile
        self.supported_sigmas = (weights.trained_sigma,)

    def denoise(self, img: RasterImage, sigma: float) -> RasterImage:
        if abs(sigma - self.weights.trained_sigma) > 1e-9:
            raise ConfigError(
                f"denoiser trained for sigma={self.weights.trained_sigma:.6g}, "
                f"requested {sigma:.6g}")
        arr = img.samples.astype(np.float64)
        if max(arr.shape) > self.tile:
            residual = _forward_tiled(self.weights, arr, tile=self.tile)
        else:
            residual = cnn_forward_array(self.weights, arr)
        return RasterImage((arr - residual).astype(np.float32), img.domain)


def cnn_denoiser(weights: CnnWeights) -> CnnDenoiser:
    return CnnDenoiser(weights)
