"""Raster container with radiometric-domain tagging and bit-exact file I/O.

The native on-disk format is RAD1: magic ``RAD1``, width (u32 LE), height
(u32 LE), domain tag (u8: 0=intensity, 1=amplitude, 2=log_intensity), 3
reserved zero bytes, then width*height float32 LE samples in row-major
order. A 16-bit PGM (P5, maxval 65535, big-endian samples) export is
provided for visual inspection of amplitude images.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError

_MAGIC = b"RAD1"
_MAX_DIM = 1 << 20
_LOG_FLOOR_REL = 1e-10
_PGM_QUANTILE = 0.999


class Domain(enum.IntEnum):
    INTENSITY = 0
    AMPLITUDE = 1
    LOG_INTENSITY = 2


@dataclass(frozen=True)
class RasterImage:
    """2-D grid of float32 samples tagged with a radiometric domain.

    Immutable: the sample buffer is copied on construction and marked
    read-only, so instances are safe to share across threads.
    """

    samples: np.ndarray
    domain: Domain = Domain.INTENSITY

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float32)
        if arr.ndim != 2 or arr.size == 0:
            raise InputError("samples must be a non-empty 2-D array")
        if not np.all(np.isfinite(arr)):
            raise InputError("samples must be finite")
        if self.domain in (Domain.INTENSITY, Domain.AMPLITUDE) and np.any(arr < 0):
            raise InputError(f"negative samples not allowed in {self.domain.name} domain")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape

    def require_domain(self, domain: Domain) -> None:
        if self.domain != domain:
            raise InputError(f"expected {domain.name} image, got {self.domain.name}")


def nearest_rank_quantile(values: np.ndarray, p: float) -> float:
    """Nearest-rank order statistic: index ceil(p*n) - 1, clamped to [0, n-1]."""
    v = np.sort(np.asarray(values).ravel())
    n = v.size
    idx = min(max(math.ceil(p * n) - 1, 0), n - 1)
    return float(v[idx])


def to_log(img: RasterImage, floor: float | None = None) -> RasterImage:
    """Log-transform an intensity image, flooring at 1e-10 x image mean."""
    img.require_domain(Domain.INTENSITY)
    if floor is None:
        mean = float(img.samples.mean(dtype=np.float64))
        if mean <= 0.0:
            raise InputError("all-zero intensity image: log floor undefined")
        floor = _LOG_FLOOR_REL * mean
    if floor <= 0.0:
        raise InputError("floor must be positive")
    out = np.log(np.maximum(img.samples.astype(np.float64), floor))
    return RasterImage(out.astype(np.float32), Domain.LOG_INTENSITY)


def from_log(img: RasterImage) -> RasterImage:
    """Pixelwise exp back to the intensity domain."""
    img.require_domain(Domain.LOG_INTENSITY)
    out = np.exp(img.samples.astype(np.float64))
    return RasterImage(out.astype(np.float32), Domain.INTENSITY)


def to_amplitude(img: RasterImage) -> RasterImage:
    if img.domain == Domain.AMPLITUDE:
        return img
    img.require_domain(Domain.INTENSITY)
    return RasterImage(np.sqrt(img.samples, dtype=np.float32), Domain.AMPLITUDE)


def to_intensity(img: RasterImage) -> RasterImage:
    if img.domain == Domain.INTENSITY:
        return img
    if img.domain == Domain.AMPLITUDE:
        return RasterImage(np.square(img.samples.astype(np.float64)).astype(np.float32),
                           Domain.INTENSITY)
    return from_log(img)


def crop(img: RasterImage, row: int, col: int, height: int, width: int) -> RasterImage:
    if row < 0 or col < 0 or row + height > img.height or col + width > img.width:
        raise InputError("crop window outside image bounds")
    return RasterImage(img.samples[row:row + height, col:col + width], img.domain)


def write_raster(img: RasterImage, path) -> None:
    header = _MAGIC + struct.pack("<IIB3x", img.width, img.height, int(img.domain))
    payload = img.samples.astype("<f4").tobytes(order="C")
    Path(path).write_bytes(header + payload)


def read_raster(path) -> RasterImage:
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise ParseError(f"{path}: truncated header")
    if data[:4] != _MAGIC:
        raise ParseError(f"{path}: bad magic {data[:4]!r}")
    width, height, tag = struct.unpack_from("<IIB", data, 4)
    if width == 0 or height == 0 or width > _MAX_DIM or height > _MAX_DIM:
        raise ParseError(f"{path}: unreasonable dimensions {width}x{height}")
    try:
        domain = Domain(tag)
    except ValueError:
        raise ParseError(f"{path}: unknown domain tag {tag}") from None
    expected = 16 + 4 * width * height
    if len(data) != expected:
        raise ParseError(f"{path}: truncated payload ({len(data)} bytes, expected {expected})")
    samples = np.frombuffer(data, dtype="<f4", offset=16).reshape(height, width)
    return RasterImage(samples, domain)


def write_pgm(img: RasterImage, path) -> float:
    """Export an amplitude image as 16-bit P5 PGM, scaled by its 99.9% quantile.

    Returns the scale (amplitude value mapped to 65535) so the mapping is
    reproducible.
    """
    img.require_domain(Domain.AMPLITUDE)
    scale = nearest_rank_quantile(img.samples, _PGM_QUANTILE)
    if scale <= 0.0:
        raise InputError("degenerate amplitude image: 99.9% quantile is zero")
    scaled = np.clip(img.samples.astype(np.float64) / scale, 0.0, 1.0)
    raw = np.round(scaled * 65535.0).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{img.width} {img.height}\n65535\n".encode("ascii"))
        f.write(raw.tobytes(order="C"))
    return scale


def read_pgm(path) -> RasterImage:
    """Import a 16-bit P5 PGM as an amplitude image with samples in [0, 1]."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ParseError(f"{path}: not a P5 PGM")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise ParseError(f"{path}: malformed PGM header") from None
    if maxval != 65535:
        raise ParseError(f"{path}: expected maxval 65535, got {maxval}")
    if width == 0 or height == 0 or width > _MAX_DIM or height > _MAX_DIM:
        raise ParseError(f"{path}: unreasonable dimensions {width}x{height}")
    expected = 2 * width * height
    raw = data[pos:pos + expected]
    if len(raw) != expected:
        raise ParseError(f"{path}: truncated payload")
    samples = np.frombuffer(raw, dtype=">u2").reshape(height, width)
    return RasterImage((samples / 65535.0).astype(np.float32), Domain.AMPLITUDE)
