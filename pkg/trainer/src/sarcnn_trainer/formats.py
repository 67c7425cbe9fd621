"""RAD1 raster and pair-manifest I/O, reimplemented from the published
format descriptions so the trainer stays decoupled from the inference
package.

RAD1: magic ``RAD1``, width (u32 LE), height (u32 LE), domain tag
(u8: 0=intensity, 1=amplitude, 2=log), 3 reserved zero bytes, then
width*height float32 LE samples row-major.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_MAGIC = b"RAD1"
_MAX_DIM = 1 << 20

DOMAIN_INTENSITY = 0
DOMAIN_AMPLITUDE = 1
DOMAIN_LOG = 2

MANIFEST_NAME = "manifest.tsv"
MANIFEST_COLUMNS = ("clean_path", "noisy_path", "image_id", "row", "col",
                    "aug_id", "looks", "seed")


class FormatError(ValueError):
    pass


def read_rad1(path) -> tuple[np.ndarray, int]:
    """Return (float32 2-D array, domain tag)."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != _MAGIC:
        raise FormatError(f"{path}: not a RAD1 file")
    width, height, tag = struct.unpack_from("<IIB", data, 4)
    if not (0 < width <= _MAX_DIM and 0 < height <= _MAX_DIM):
        raise FormatError(f"{path}: unreasonable dimensions {width}x{height}")
    if len(data) != 16 + 4 * width * height:
        raise FormatError(f"{path}: truncated payload")
    samples = np.frombuffer(data, dtype="<f4", offset=16).reshape(height, width)
    return samples.copy(), tag


def write_rad1(samples: np.ndarray, domain: int, path) -> None:
    samples = np.asarray(samples, dtype="<f4")
    if samples.ndim != 2:
        raise FormatError("samples must be 2-D")
    header = _MAGIC + struct.pack("<IIB3x", samples.shape[1], samples.shape[0],
                                  domain)
    Path(path).write_bytes(header + samples.tobytes(order="C"))


@dataclass(frozen=True)
class PairRecord:
    clean: np.ndarray  # log-intensity patch
    noisy: np.ndarray
    image_id: str
    row: int
    col: int
    aug_id: int
    looks: float
    seed: int


def read_manifest(manifest_path) -> list[PairRecord]:
    """Load all patch pairs referenced by a manifest archive."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    lines = manifest_path.read_text().splitlines()
    if not lines or tuple(lines[0].split("\t")) != MANIFEST_COLUMNS:
        raise FormatError(f"{manifest_path}: bad manifest header")
    base = manifest_path.parent
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(MANIFEST_COLUMNS):
            raise FormatError(f"{manifest_path}:{lineno}: expected "
                              f"{len(MANIFEST_COLUMNS)} columns")
        clean, tag_c = read_rad1(base / fields[0])
        noisy, tag_n = read_rad1(base / fields[1])
        if tag_c != DOMAIN_LOG or tag_n != DOMAIN_LOG:
            raise FormatError(f"{manifest_path}:{lineno}: pairs must be "
                              "log-domain patches")
        if clean.shape != noisy.shape:
            raise FormatError(f"{manifest_path}:{lineno}: shape mismatch "
                              f"{clean.shape} vs {noisy.shape}")
        records.append(PairRecord(clean, noisy, fields[2], int(fields[3]),
                                  int(fields[4]), int(fields[5]),
                                  float(fields[6]), int(fields[7])))
    if not records:
        raise FormatError(f"{manifest_path}: empty manifest")
    return records
