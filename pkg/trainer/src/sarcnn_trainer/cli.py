"""Command line for the trainer: train from a pair archive, or warm-start
transfer an existing network to a different number of looks.
"""
from __future__ import annotations

import argparse
import sys

from .train import TrainConfig, TrainingDiverged, train, transfer


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--depth", type=int, default=19)
    p.add_argument("--channels", type=int, default=64)
    p.add_argument("--loss", choices=("l1", "l2", "smooth_l1"), default="l1")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)


def _config(args, looks: float) -> TrainConfig:
    return TrainConfig(depth=args.depth, channels=args.channels,
                       loss=args.loss, epochs=args.epochs,
                       batch_size=args.batch_size,
                       learning_rate=args.learning_rate,
                       looks=looks, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sarcnn-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network on a pair archive")
    p.add_argument("--manifest", required=True)
    p.add_argument("--looks", type=float, required=True)
    p.add_argument("--out", required=True)
    _add_config_args(p)

    p = sub.add_parser("transfer", help="warm-start toward a new look count")
    p.add_argument("--weights", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--new-looks", type=float, required=True)
    p.add_argument("--out", required=True)
    _add_config_args(p)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            train(args.manifest, _config(args, args.looks), args.out)
        else:
            transfer(args.weights, args.manifest, args.new_looks,
                     _config(args, args.new_looks), args.out)
        return 0
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
