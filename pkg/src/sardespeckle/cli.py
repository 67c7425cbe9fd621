"""Command-line surface tying the toolkit together.

Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 numerical
failure. Errors additionally emit one machine-readable line on stderr of
the form ``error code=<N> msg=<text>``. Every run prints a provenance
header (version, resolved parameters, seeds) so results are replayable.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import __version__, dataset, denoise_engines, homomorphic, metrics, mulog
from .errors import ConfigError, InputError, NumericalError, ParseError, SpeckleError
from .image_core import read_raster, write_raster
from .speckle_stats import simulate_speckle

METHODS = ("homom-tv", "homom-cnn", "mulog-tv", "mulog-cnn", "sarcnn")


class UsageError(SpeckleError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_region(text: str) -> tuple[int, int, int, int]:
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError("region must be row,col,height,width")
    try:
        return tuple(int(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise UsageError(f"bad region {text!r}") from None


def _provenance(args, command: str) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(f"# sardespeckle {__version__} | {command} | "
          + " ".join(f"{k}={v}" for k, v in resolved.items()))


def _build_method(args):
    """Return a callable (noisy_intensity, L) -> despeckled intensity."""
    name = args.method
    if name in ("homom-cnn", "mulog-cnn", "sarcnn"):
        if not args.weights:
            raise UsageError(f"--weights is required for method {name}")
        weights = denoise_engines.load_weights(args.weights)
    if name == "homom-tv":
        denoiser = denoise_engines.TvDenoiser(lam_factor=args.lam_factor)
        return lambda Y, L: homomorphic.homomorphic_despeckle(Y, L, denoiser)
    if name == "homom-cnn":
        denoiser = denoise_engines.cnn_denoiser(weights)
        return lambda Y, L: homomorphic.homomorphic_despeckle(Y, L, denoiser)
    if name == "mulog-tv":
        denoiser = denoise_engines.TvDenoiser(lam_factor=args.lam_factor)
        return lambda Y, L: mulog.mulog_despeckle(Y, L, denoiser,
                                                  iterations=args.iters,
                                                  beta0=args.beta0)
    if name == "mulog-cnn":
        denoiser = denoise_engines.cnn_denoiser(weights)
        return lambda Y, L: mulog.mulog_despeckle(Y, L, denoiser,
                                                  iterations=args.iters,
                                                  beta0=args.beta0)
    if name == "sarcnn":
        return lambda Y, L: homomorphic.sarcnn_despeckle(Y, L, weights)
    raise UsageError(f"unknown method {name!r}")


def _cmd_simulate(args):
    img = read_raster(getattr(args, "in"))
    out = simulate_speckle(img, args.looks, args.seed)
    write_raster(out, args.out)
    print(f"wrote {args.out} ({out.width}x{out.height})")


def _cmd_despeckle(args):
    method = _build_method(args)
    img = read_raster(getattr(args, "in"))
    if args.subsample2:
        img = dataset.subsample2(img)
    out = method(img, args.looks)
    write_raster(out, args.out)
    print(f"wrote {args.out} ({out.width}x{out.height})")


def _cmd_dataset_multilook(args):
    stack = dataset.TemporalStack(tuple(read_raster(p) for p in args.inputs))
    out = dataset.temporal_multilook(stack)
    write_raster(out, args.out)
    print(f"wrote {args.out} (averaged {stack.count} dates)")


def _cmd_dataset_groundtruth(args):
    stack = dataset.TemporalStack(tuple(read_raster(p) for p in args.inputs))
    denoiser = denoise_engines.TvDenoiser(lam_factor=args.lam_factor)
    out = dataset.generate_groundtruth(stack, denoiser, _parse_region(args.region))
    write_raster(out, args.out)
    print(f"wrote {args.out}")


def _cmd_dataset_patches(args):
    img = read_raster(getattr(args, "in"))
    anchors = dataset.patch_anchors(img.height, img.width, args.size, args.stride)
    print(f"{len(anchors)} patches of {args.size}x{args.size}, stride {args.stride}")


def _cmd_dataset_pairs(args):
    clean = read_raster(args.clean)
    pairs = dataset.synthesize_pairs(clean, args.looks, args.seed,
                                     size=args.size, stride=args.stride)
    manifest = dataset.write_pair_archive(pairs, args.out, args.looks, args.seed)
    print(f"wrote {len(pairs)} pairs, manifest {manifest}")


def _cmd_eval(args):
    clean = read_raster(args.clean)
    method = _build_method(args)
    report = metrics.evaluate_suite(clean, method, args.looks,
                                    args.realizations, args.seed,
                                    threads=args.threads)
    for line in report.to_lines():
        print(line)
    print(report.table())


def _cmd_metrics_enl(args):
    img = read_raster(getattr(args, "in"))
    est = metrics.enl(img, _parse_region(args.region))
    flag = " (capped)" if est.capped else ""
    print(f"region={est.region} mean={est.mean:.6g} variance={est.variance:.6g} "
          f"enl={est.enl:.4f}{flag}")


def _cmd_metrics_ratio(args):
    noisy = read_raster(args.noisy)
    denoised = read_raster(args.denoised)
    out = metrics.ratio_residual(noisy, denoised)
    write_raster(out, args.out)
    print(f"wrote {args.out} mean={float(out.samples.mean()):.6f}")


def _cmd_weights_inspect(args):
    w = denoise_engines.load_weights(args.weights)
    chain = "->".join(str(layer.in_channels) for layer in w.layers)
    chain += f"->{w.layers[-1].out_channels}"
    print(f"layers D={w.depth}  channel chain {chain}")
    print(f"trained_sigma={w.trained_sigma:.6g} trained_bias_term={w.trained_bias_term:.6g}")
    print(f"{'Layer':>6s} {'N_out':>6s}  Configuration")
    for i, layer in enumerate(w.layers, start=1):
        cfg = {denoise_engines.LayerKind.CONV_RELU: "3x3 CONV, ReLU",
               denoise_engines.LayerKind.CONV_BN_RELU: "3x3 CONV, Batch Norm. (folded), ReLU",
               denoise_engines.LayerKind.CONV: "3x3 CONV"}[layer.kind]
        print(f"{i:>6d} {layer.out_channels:>6d}  {cfg}")


def build_parser() -> _Parser:
    parser = _Parser(prog="sardespeckle")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads (1 = bit-reproducible baseline)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="multiply a reflectivity image by speckle")
    p.add_argument("--in", required=True)
    p.add_argument("--looks", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("despeckle", help="run a despeckling pipeline")
    p.add_argument("--in", required=True)
    p.add_argument("--looks", type=float, required=True)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--weights")
    p.add_argument("--iters", type=int, default=mulog.DEFAULT_ITERATIONS)
    p.add_argument("--beta0", type=float, default=None,
                   help="ADMM penalty (default: 1/sigma_train^2)")
    p.add_argument("--lam-factor", type=float, default=denoise_engines.TV_LAMBDA_FACTOR)
    p.add_argument("--subsample2", action="store_true",
                   help="decimate by 2 first to break speckle correlation")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_despeckle)

    pd = sub.add_parser("dataset", help="training-set operations")
    dsub = pd.add_subparsers(dest="dataset_command", required=True)
    p = dsub.add_parser("multilook")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dataset_multilook)
    p = dsub.add_parser("groundtruth")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--region", required=True, help="row,col,height,width")
    p.add_argument("--lam-factor", type=float, default=denoise_engines.TV_LAMBDA_FACTOR)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dataset_groundtruth)
    p = dsub.add_parser("patches")
    p.add_argument("--in", required=True)
    p.add_argument("--size", type=int, default=dataset.PATCH_SIZE)
    p.add_argument("--stride", type=int, default=dataset.PATCH_STRIDE)
    p.set_defaults(func=_cmd_dataset_patches)
    p = dsub.add_parser("pairs")
    p.add_argument("--clean", required=True)
    p.add_argument("--looks", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--size", type=int, default=dataset.PATCH_SIZE)
    p.add_argument("--stride", type=int, default=dataset.PATCH_STRIDE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dataset_pairs)

    p = sub.add_parser("eval", help="multi-realization PSNR/SSIM evaluation")
    p.add_argument("--clean", required=True)
    p.add_argument("--looks", type=float, required=True)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--weights")
    p.add_argument("--iters", type=int, default=mulog.DEFAULT_ITERATIONS)
    p.add_argument("--beta0", type=float, default=None,
                   help="ADMM penalty (default: 1/sigma_train^2)")
    p.add_argument("--lam-factor", type=float, default=denoise_engines.TV_LAMBDA_FACTOR)
    p.add_argument("--realizations", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_eval)

    pm = sub.add_parser("metrics", help="evaluation metrics")
    msub = pm.add_subparsers(dest="metrics_command", required=True)
    p = msub.add_parser("enl")
    p.add_argument("--in", required=True)
    p.add_argument("--region", required=True, help="row,col,height,width")
    p.set_defaults(func=_cmd_metrics_enl)
    p = msub.add_parser("ratio")
    p.add_argument("--noisy", required=True)
    p.add_argument("--denoised", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_metrics_ratio)

    pw = sub.add_parser("weights", help="weight-file utilities")
    wsub = pw.add_subparsers(dest="weights_command", required=True)
    p = wsub.add_parser("inspect")
    p.add_argument("weights")
    p.set_defaults(func=_cmd_weights_inspect)

    return parser


def _fail(code: int, message: str) -> int:
    print(f"error code={code} msg={message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _provenance(args, args.command)
        args.func(args)
        return 0
    except UsageError as exc:
        return _fail(1, str(exc))
    except (InputError, ParseError, ConfigError, FileNotFoundError) as exc:
        return _fail(2, str(exc))
    except NumericalError as exc:
        return _fail(3, str(exc))


if __name__ == "__main__":
    sys.exit(main())
