"""Training-set machinery: temporal multilooking, ground-truth generation,
patch extraction with dihedral augmentation, noisy/clean pair synthesis and
the factor-2 decimation used to break speckle correlation.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics, mulog
from .errors import InputError, ParseError
from .image_core import Domain, RasterImage, read_raster, to_log, write_raster
from .speckle_stats import simulate_speckle

PATCH_SIZE = 40
PATCH_STRIDE = 10
_MIN_STACK_DATES = 8

MANIFEST_NAME = "manifest.tsv"
MANIFEST_COLUMNS = ("clean_path", "noisy_path", "image_id", "row", "col",
                    "aug_id", "looks", "seed")


@dataclass(frozen=True)
class TemporalStack:
    """Co-registered intensity images of the same scene at different dates."""

    dates: tuple[RasterImage, ...]

    def __post_init__(self):
        if len(self.dates) < 1:
            raise InputError("stack needs at least one date")
        shape = self.dates[0].shape
        for img in self.dates:
            img.require_domain(Domain.INTENSITY)
            if img.shape != shape:
                raise InputError("all dates must share the same shape")

    @property
    def count(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class PatchPair:
    clean: np.ndarray  # log-intensity patch
    noisy: np.ndarray  # log-intensity patch
    provenance: tuple[str, int, int, int]  # (image id, row, col, augmentation id)


def temporal_multilook(stack: TemporalStack) -> RasterImage:
    """Pixelwise arithmetic mean of the stack's intensities."""
    acc = np.zeros(stack.dates[0].shape, dtype=np.float64)
    for img in stack.dates:
        acc += img.samples
    return RasterImage((acc / stack.count).astype(np.float32), Domain.INTENSITY)


def generate_groundtruth(stack: TemporalStack, residual_denoiser,
                         region: tuple[int, int, int, int]) -> RasterImage:
    """Temporal multilook followed by a residual despeckling pass.

    The equivalent number of looks is estimated on the caller-specified
    homogeneous region of the multilooked image and drives the iterative
    despeckler. Stacks shorter than 8 dates are accepted with a warning.
    """
    if stack.count < _MIN_STACK_DATES:
        warnings.warn(f"only {stack.count} dates in stack; ground truth may "
                      "retain speckle", RuntimeWarning, stacklevel=2)
    averaged = temporal_multilook(stack)
    estimate = metrics.enl(averaged, region)
    return mulog.mulog_despeckle(averaged, max(1.0, estimate.enl), residual_denoiser)


def patch_anchors(height: int, width: int, size: int, stride: int) -> list[tuple[int, int]]:
    """Row-major top-left anchors with anchor + size <= dimension."""
    if size > height or size > width:
        raise InputError(f"patch size {size} exceeds image {height}x{width}")
    if stride < 1:
        raise InputError("stride must be >= 1")
    rows = range(0, height - size + 1, stride)
    cols = range(0, width - size + 1, stride)
    return [(r, c) for r in rows for c in cols]


def extract_patches(img: RasterImage, size: int = PATCH_SIZE,
                    stride: int = PATCH_STRIDE) -> list[np.ndarray]:
    return [img.samples[r:r + size, c:c + size].copy()
            for r, c in patch_anchors(img.height, img.width, size, stride)]


def augment(patch: np.ndarray) -> list[np.ndarray]:
    """The 8 dihedral-group transforms of a square patch, in a fixed order:
    identity, rot90, rot180, rot270, horizontal flip, vertical flip,
    transpose, anti-transpose.
    """
    patch = np.asarray(patch)
    if patch.ndim != 2 or patch.shape[0] != patch.shape[1]:
        raise InputError("augmentation requires a square patch")
    return [
        patch.copy(),
        np.rot90(patch, 1).copy(),
        np.rot90(patch, 2).copy(),
        np.rot90(patch, 3).copy(),
        np.fliplr(patch).copy(),
        np.flipud(patch).copy(),
        patch.T.copy(),
        np.rot90(patch, 2).T.copy(),
    ]


def synthesize_pairs(clean: RasterImage, L: float, seed: int,
                     size: int = PATCH_SIZE, stride: int = PATCH_STRIDE,
                     image_id: str = "0",
                     augmentations: bool = True) -> list[PatchPair]:
    """Simulate speckle on a clean scene and cut aligned log-domain patches."""
    clean.require_domain(Domain.INTENSITY)
    if (clean.samples <= 0).any():
        raise InputError("clean reflectivity must be strictly positive")
    noisy = simulate_speckle(clean, L, seed)
    clean_log = to_log(clean).samples
    noisy_log = to_log(noisy).samples
    pairs = []
    for r, c in patch_anchors(clean.height, clean.width, size, stride):
        cp = clean_log[r:r + size, c:c + size]
        np_ = noisy_log[r:r + size, c:c + size]
        if augmentations:
            for aug_id, (ca, na) in enumerate(zip(augment(cp), augment(np_))):
                pairs.append(PatchPair(ca, na, (image_id, r, c, aug_id)))
        else:
            pairs.append(PatchPair(cp.copy(), np_.copy(), (image_id, r, c, 0)))
    return pairs


def subsample2(img: RasterImage) -> RasterImage:
    """Keep samples at even (row, col) indices; decimation without averaging."""
    if img.height < 2 or img.width < 2:
        raise InputError("image must be at least 2x2")
    return RasterImage(img.samples[::2, ::2], img.domain)


def write_pair_archive(pairs: list[PatchPair], directory, L: float, seed: int) -> Path:
    """Write patch pairs as RAD1 files plus a tab-separated manifest.

    Manifest columns (in order): clean_path, noisy_path, image_id, row, col,
    aug_id, looks, seed. Paths are relative to the archive directory.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(MANIFEST_COLUMNS)]
    for i, pair in enumerate(pairs):
        clean_name = f"clean_{i:06d}.rad"
        noisy_name = f"noisy_{i:06d}.rad"
        write_raster(RasterImage(pair.clean, Domain.LOG_INTENSITY), directory / clean_name)
        write_raster(RasterImage(pair.noisy, Domain.LOG_INTENSITY), directory / noisy_name)
        image_id, row, col, aug_id = pair.provenance
        lines.append("\t".join(map(str, (clean_name, noisy_name, image_id,
                                         row, col, aug_id, L, seed))))
    manifest = directory / MANIFEST_NAME
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def read_pair_archive(manifest_path) -> list[PatchPair]:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    lines = manifest_path.read_text().splitlines()
    if not lines or tuple(lines[0].split("\t")) != MANIFEST_COLUMNS:
        raise ParseError(f"{manifest_path}: bad manifest header")
    base = manifest_path.parent
    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(MANIFEST_COLUMNS):
            raise ParseError(f"{manifest_path}:{lineno}: expected "
                             f"{len(MANIFEST_COLUMNS)} columns")
        clean = read_raster(base / fields[0])
        noisy = read_raster(base / fields[1])
        provenance = (fields[2], int(fields[3]), int(fields[4]), int(fields[5]))
        pairs.append(PatchPair(clean.samples, noisy.samples, provenance))
    return pairs
