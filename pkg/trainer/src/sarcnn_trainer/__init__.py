"""Desk-scale training of DnCNN-shaped residual despeckling networks.

Consumes patch-pair archives (RAD1 rasters plus a tab-separated manifest)
and exports SCNW weight files with reference forward-pass fixtures. The
only coupling to the inference toolkit is through those file formats.
"""

__version__ = "0.1.0"

from .formats import read_manifest, read_rad1, write_rad1
from .model import DnCNN, export_scnw
from .train import TrainConfig, TrainingDiverged, train, transfer

__all__ = [
    "__version__",
    "read_manifest", "read_rad1", "write_rad1",
    "DnCNN", "export_scnw",
    "TrainConfig", "TrainingDiverged", "train", "transfer",
]
