"""Training loop: quantile normalization, residual targets with the
log-speckle bias term, l1/l2/smooth-l1 losses, SCNW export with reference
forward-pass fixtures, and warm-start transfer to a different number of
looks.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from scipy.special import digamma, polygamma

from .formats import DOMAIN_LOG, PairRecord, read_manifest, write_rad1
from .model import DnCNN, export_scnw, load_scnw_into

#: Strength grid of the stock 14-network denoiser family.
SIGMA_GRID = tuple(k / 255.0 for k in range(10, 80, 5))

Q_LOW_P = 0.003
Q_HIGH_P = 0.997

FIXTURE_COUNT = 10


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    depth: int = 19          # toy runs use 5
    channels: int = 64
    loss: str = "l1"         # l1 | l2 | smooth_l1 (log-cosh)
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 1e-3
    looks: float = 1.0
    seed: int = 0
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.depth < 3:
            raise ValueError("depth must be >= 3")
        if self.loss not in ("l1", "l2", "smooth_l1"):
            raise ValueError(f"unknown loss {self.loss!r}")


def log_bias(L: float) -> float:
    """Expected log-speckle value digamma(L) - log(L)."""
    return float(digamma(L)) - math.log(L)


def _loss_fn(name: str):
    if name == "l1":
        return lambda pred, target: (pred - target).abs().mean()
    if name == "l2":
        return lambda pred, target: ((pred - target) ** 2).mean()
    # smooth l1 via log-cosh, numerically stable form |d| + log((1+e^-2|d|)/2)
    def logcosh(pred, target):
        d = (pred - target).abs()
        return (d + torch.log1p(torch.exp(-2.0 * d)) - math.log(2.0)).mean()
    return logcosh


def _nearest_rank(sorted_vals: np.ndarray, p: float) -> float:
    idx = min(max(math.ceil(p * sorted_vals.size) - 1, 0), sorted_vals.size - 1)
    return float(sorted_vals[idx])


@dataclass(frozen=True)
class Normalization:
    """Affine map x -> gain * (x - q_low) / (q_high - q_low) shared by all
    patches of a training run; sigma_train is the grid strength the noise
    level lands on after the map."""

    q_low: float
    q_high: float
    sigma: float
    sigma_train: float

    @property
    def gain(self) -> float:
        return self.sigma_train / self.sigma

    @property
    def scale(self) -> float:
        """Raw log units per normalized unit."""
        return (self.q_high - self.q_low) / self.gain

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.q_low) * (self.gain / (self.q_high - self.q_low))


def fit_normalization(records: list[PairRecord], L: float) -> Normalization:
    """Global 0.3%/99.7% quantile fit over all noisy patch samples."""
    flat = np.sort(np.concatenate([r.noisy.ravel() for r in records])
                   .astype(np.float64))
    q_low = _nearest_rank(flat, Q_LOW_P)
    q_high = _nearest_rank(flat, Q_HIGH_P)
    if q_high <= q_low:
        raise ValueError("degenerate archive: log quantiles coincide")
    sigma = math.sqrt(float(polygamma(1, L))) / (q_high - q_low)
    eligible = [g for g in SIGMA_GRID if g <= sigma]
    sigma_train = max(eligible) if eligible else min(SIGMA_GRID)
    return Normalization(q_low, q_high, sigma, sigma_train)


def build_tensors(records: list[PairRecord], norm: Normalization,
                  L: float) -> tuple[torch.Tensor, torch.Tensor]:
    """Normalized inputs and residual targets.

    The network learns R(y) with y - R(y) ~ x - bias (log-domain, bias =
    digamma(L) - log L), so in normalized units the target is
    (y_raw - x_raw + bias) / scale.
    """
    bias = log_bias(L)
    inputs = np.stack([norm.apply(r.noisy.astype(np.float64)) for r in records])
    targets = np.stack([(r.noisy.astype(np.float64) - r.clean + bias)
                        / norm.scale for r in records])
    to = lambda a: torch.from_numpy(a.astype(np.float32)).unsqueeze(1)
    return to(inputs), to(targets)


def _evaluate(model: DnCNN, loss_fn, inputs: torch.Tensor,
              targets: torch.Tensor, batch_size: int) -> float:
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for i in range(0, inputs.shape[0], batch_size):
            xb = inputs[i:i + batch_size]
            total += float(loss_fn(model(xb), targets[i:i + batch_size])) * len(xb)
            count += len(xb)
    return total / count


def train_loop(model: torch.nn.Module, loss_fn, inputs: torch.Tensor,
               targets: torch.Tensor, epochs: int, batch_size: int,
               learning_rate: float, generator: torch.Generator,
               log=None) -> list[float]:
    """Adam training over shuffled mini-batches; returns per-epoch losses.

    Raises TrainingDiverged on a non-finite loss.
    """
    opt = torch.optim.Adam(model.parameters(), lr=learning_rate)
    history = []
    n = inputs.shape[0]
    for epoch in range(epochs):
        model.train()
        perm = torch.randperm(n, generator=generator)
        running, seen = 0.0, 0
        for i in range(0, n, batch_size):
            idx = perm[i:i + batch_size]
            opt.zero_grad()
            loss = loss_fn(model(inputs[idx]), targets[idx])
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"loss became non-finite at epoch {epoch}, step {i // batch_size}"
                    " (try a lower learning rate)")
            loss.backward()
            opt.step()
            running += float(loss.detach()) * len(idx)
            seen += len(idx)
        history.append(running / seen)
        if log is not None:
            log(f"epoch {epoch + 1}/{epochs}: train loss {history[-1]:.6f}")
    return history


def _write_fixtures(model: DnCNN, inputs: torch.Tensor, out_dir: Path,
                    generator: torch.Generator) -> None:
    """Export FIXTURE_COUNT (input, residual) reference pairs as RAD1."""
    model.eval()
    idx = torch.randperm(inputs.shape[0], generator=generator)[:FIXTURE_COUNT]
    with torch.no_grad():
        for k, i in enumerate(idx.tolist()):
            x = inputs[i:i + 1]
            r = model(x)
            write_rad1(x[0, 0].numpy(), DOMAIN_LOG,
                       out_dir / f"fixture_{k:02d}_input.rad")
            write_rad1(r[0, 0].numpy(), DOMAIN_LOG,
                       out_dir / f"fixture_{k:02d}_residual.rad")


def _split(records: list[PairRecord], fraction: float, seed: int):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(records))
    n_val = max(1, int(len(records) * fraction))
    val = [records[i] for i in order[:n_val]]
    tr = [records[i] for i in order[n_val:]]
    return tr, val


def train(manifest, config: TrainConfig, out_dir,
          warm_start: "str | Path | None" = None, log=print) -> dict:
    """Train on a pair archive and export weights.scnw plus fixtures.

    Returns a summary dict (also written as training.json) with the loss
    history and resolved parameters.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)
    generator = torch.Generator().manual_seed(config.seed)

    records = read_manifest(manifest)
    norm = fit_normalization(records, config.looks)
    train_recs, val_recs = _split(records, config.validation_fraction,
                                  config.seed)
    x_tr, t_tr = build_tensors(train_recs, norm, config.looks)
    x_val, t_val = build_tensors(val_recs, norm, config.looks)

    parent = None
    if warm_start is not None:
        model, _, _ = load_scnw_into(warm_start)
        if model.depth != config.depth or model.channels != config.channels:
            raise ValueError("warm-start weights do not match the configured "
                             f"architecture (D={model.depth}, "
                             f"C={model.channels})")
        parent = str(warm_start)
    else:
        model = DnCNN(config.depth, config.channels)

    loss_fn = _loss_fn(config.loss)
    initial_val = _evaluate(model, loss_fn, x_val, t_val, config.batch_size)
    history = train_loop(model, loss_fn, x_tr, t_tr, config.epochs,
                         config.batch_size, config.learning_rate, generator,
                         log=log)
    final_val = _evaluate(model, loss_fn, x_val, t_val, config.batch_size)

    bias = log_bias(config.looks)
    weights_path = out_dir / "weights.scnw"
    export_scnw(model, norm.sigma_train, bias, weights_path)
    _write_fixtures(model, x_val if len(val_recs) >= FIXTURE_COUNT else x_tr,
                    out_dir, generator)

    summary = {
        "config": {k: getattr(config, k) for k in
                   ("depth", "channels", "loss", "epochs", "batch_size",
                    "learning_rate", "looks", "seed")},
        "pairs": len(records),
        "normalization": {"q_low": norm.q_low, "q_high": norm.q_high,
                          "sigma": norm.sigma, "sigma_train": norm.sigma_train},
        "trained_bias_term": bias,
        "initial_validation_loss": initial_val,
        "final_validation_loss": final_val,
        "train_loss_history": history,
        "warm_start_parent": parent,
        "weights": weights_path.name,
    }
    (out_dir / "training.json").write_text(json.dumps(summary, indent=2) + "\n")
    if log is not None:
        log(f"validation loss {initial_val:.6f} -> {final_val:.6f}; "
            f"wrote {weights_path}")
    return summary


def transfer(weights, manifest, new_L: float, config: TrainConfig,
             out_dir, log=print) -> dict:
    """Warm-start re-training toward a different number of looks.

    The exported bias term becomes digamma(new_L) - log(new_L); the parent
    weights path is recorded in training.json.
    """
    cfg = TrainConfig(**{**{k: getattr(config, k) for k in
                            ("depth", "channels", "loss", "epochs",
                             "batch_size", "learning_rate", "seed",
                             "validation_fraction")},
                         "looks": new_L})
    return train(manifest, cfg, out_dir, warm_start=weights, log=log)
