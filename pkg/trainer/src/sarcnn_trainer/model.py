"""DnCNN-shaped residual network and its SCNW export.

Layer stack: conv+ReLU, (D-2) x conv+BN+ReLU, conv — all 3x3, 64 channels
by default, single channel in and out, residual prediction. Batch-norm
layers are exported unfolded (SCNW kind 1 with gamma/beta/mean/var) so the
consumer performs the folding.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import torch
from torch import nn

_SCNW_MAGIC = b"SCNW"
_SCNW_VERSION = 1
_BN_EPS = 1e-5


class DnCNN(nn.Module):
    def __init__(self, depth: int = 19, channels: int = 64):
        super().__init__()
        if depth < 3:
            raise ValueError("depth must be >= 3")
        self.depth = depth
        self.channels = channels
        layers: list[nn.Module] = [nn.Conv2d(1, channels, 3, padding=1),
                                   nn.ReLU(inplace=True)]
        for _ in range(depth - 2):
            layers += [nn.Conv2d(channels, channels, 3, padding=1),
                       nn.BatchNorm2d(channels, eps=_BN_EPS),
                       nn.ReLU(inplace=True)]
        layers.append(nn.Conv2d(channels, 1, 3, padding=1))
        self.body = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Predict the residual of a (N, 1, H, W) batch."""
        return self.body(x)


def _conv_bn_groups(model: DnCNN):
    """Yield (kind, conv, bn-or-None) triples in SCNW layer order."""
    mods = [m for m in model.body
            if isinstance(m, (nn.Conv2d, nn.BatchNorm2d))]
    i = 0
    while i < len(mods):
        conv = mods[i]
        if i + 1 < len(mods) and isinstance(mods[i + 1], nn.BatchNorm2d):
            yield 1, conv, mods[i + 1]
            i += 2
        elif i == len(mods) - 1:
            yield 2, conv, None  # final plain conv
            i += 1
        else:
            yield 0, conv, None
            i += 1


def export_scnw(model: DnCNN, trained_sigma: float, trained_bias_term: float,
                path) -> None:
    """Write the network as an SCNW weight file (BN kept unfolded)."""
    model.eval()
    buf = bytearray()
    buf += _SCNW_MAGIC
    layers = list(_conv_bn_groups(model))
    buf += struct.pack("<IffI", _SCNW_VERSION, trained_sigma,
                       trained_bias_term, len(layers))
    for kind, conv, bn in layers:
        out_ch, in_ch = conv.weight.shape[:2]
        buf += struct.pack("<BII", kind, in_ch, out_ch)
        buf += conv.weight.detach().numpy().astype("<f4").tobytes()
        bias = conv.bias.detach().numpy() if conv.bias is not None \
            else np.zeros(out_ch)
        buf += bias.astype("<f4").tobytes()
        if kind == 1:
            for t in (bn.weight, bn.bias, bn.running_mean, bn.running_var):
                buf += t.detach().numpy().astype("<f4").tobytes()
    Path(path).write_bytes(bytes(buf))


def load_scnw_into(path) -> tuple[DnCNN, float, float]:
    """Rebuild a DnCNN from an SCNW file written by export_scnw.

    Only used for warm-starting; expects the unfolded layout this trainer
    writes (kind 0, kind 1 x (D-2), kind 2).
    """
    data = Path(path).read_bytes()
    if data[:4] != _SCNW_MAGIC:
        raise ValueError(f"{path}: not an SCNW file")
    version, sigma, bias_term, count = struct.unpack_from("<IffI", data, 4)
    if version != _SCNW_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    pos = 20
    specs = []
    for _ in range(count):
        kind, in_ch, out_ch = struct.unpack_from("<BII", data, pos)
        pos += 9
        n_k = out_ch * in_ch * 9
        kernel = np.frombuffer(data, "<f4", n_k, pos).reshape(out_ch, in_ch, 3, 3)
        pos += 4 * n_k
        bias = np.frombuffer(data, "<f4", out_ch, pos)
        pos += 4 * out_ch
        bn = None
        if kind == 1:
            bn = [np.frombuffer(data, "<f4", out_ch, pos + 4 * out_ch * j)
                  for j in range(4)]
            pos += 16 * out_ch
        specs.append((kind, kernel, bias, bn))
    if pos != len(data):
        raise ValueError(f"{path}: trailing bytes")
    model = DnCNN(depth=len(specs), channels=specs[0][1].shape[0])
    with torch.no_grad():
        for (kind, kernel, bias, bn), (mkind, conv, bnm) in zip(
                specs, _conv_bn_groups(model)):
            if kind != mkind:
                raise ValueError(f"{path}: layer layout is not the trainer's "
                                 "unfolded DnCNN shape")
            conv.weight.copy_(torch.from_numpy(kernel.copy()))
            conv.bias.copy_(torch.from_numpy(bias.copy()))
            if bn is not None:
                bnm.weight.copy_(torch.from_numpy(bn[0].copy()))
                bnm.bias.copy_(torch.from_numpy(bn[1].copy()))
                bnm.running_mean.copy_(torch.from_numpy(bn[2].copy()))
                bnm.running_var.copy_(torch.from_numpy(bn[3].copy()))
    return model, sigma, bias_term
