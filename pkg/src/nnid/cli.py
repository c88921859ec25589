"""Command-line interface.

Subcommands cover single artifacts (costmap, hist, crop, embed, dconv)
and dataset construction (synth-corpus, build-nnid, embed-dataset,
build-multi, calibrate, report). Exit codes: 0 success, 2 invalid
configuration, 3 data error, 4 convergence failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import EXIT_CONFIG, NnidError

logger = logging.getLogger("nnid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nnid",
        description="Build nearly-nested image datasets with matched cost "
        "distributions and calibrated payloads.",
    )
    parser.add_argument("--version", action="version", version=f"nnid {__version__}")
    parser.add_argument("--seed", type=int, default=0, help="global seed")
    parser.add_argument("--threads", type=int, default=1, help="worker pool size")
    parser.add_argument(
        "--scale", type=float, default=1.0, help="scale factor for split sizes"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("costmap", help="compute a cost map for one image")
    p.add_argument("image")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--sigma", type=float, default=1.0)

    p = sub.add_parser("hist", help="histogram of a cost map")
    p.add_argument("costmap")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--lo", type=float, default=-2.0)
    p.add_argument("--hi", type=float, default=6.0)

    p = sub.add_parser("crop", help="search the best-matching crop position")
    p.add_argument("costmap")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--image", help="mother image (for --recompute-final)")
    p.add_argument(
        "--recompute-final",
        action="store_true",
        help="also score the winner by recomputing costs on the cropped pixels",
    )

    p = sub.add_parser("embed", help="embed one cover at a relative payload")
    p.add_argument("cover")
    p.add_argument("costmap")
    p.add_argument("--alpha", type=float, required=True)
    # same dest as the global flag; SUPPRESS keeps the globally parsed
    # value unless the option is repeated after the subcommand
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="embedding seed")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("calibrate", help="dichotomous payload calibration")
    p.add_argument("--manifest")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--target", type=float, default=0.76)
    p.add_argument("--tol", type=float, default=0.005)
    p.add_argument("--max-iter", type=int, default=30)
    p.add_argument(
        "--detector",
        default="builtin",
        help='builtin | synthetic[:slope] | cmd:"<command template>"',
    )
    p.add_argument("--probe-images", type=int, default=None)
    p.add_argument("--workdir", default=None)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("synth-corpus", help="generate a synthetic mother corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--width", type=int, default=3072)
    p.add_argument("--height", type=int, default=2048)

    p = sub.add_parser("build-nnid", help="cost-matched crops for every size")
    p.add_argument("mother_dir")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--sizes", type=int, nargs="+", default=[256, 512, 1024, 2048])
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--recompute-final", action="store_true")
    p.add_argument(
        "--assemble-splits",
        action="store_true",
        help="also assign train/val/test splits at the configured --scale",
    )

    p = sub.add_parser("embed-dataset", help="embed every cover in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument(
        "--alpha-table",
        default=None,
        help='JSON object {dim: alpha}, default {"256": 0.4, "512": 0.3204, "1024": 0.28895}',
    )
    p.add_argument("--sigma", type=float, default=1.0)

    p = sub.add_parser("build-multi", help="mixed-dimension dataset from three UNIs")
    p.add_argument("--manifests", nargs=3, required=True)
    p.add_argument("--pairs-per-dim", type=int, default=None)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("report", help="difficulty statistics for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--mothers", default=None)
    p.add_argument("--baselines", type=int, default=0)
    p.add_argument("--bins", type=int, default=64)

    p = sub.add_parser("dconv", help="dilated convolution of a raw matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--kernel", required=True)
    p.add_argument("--dilation", type=int, default=1)
    p.add_argument("-o", "--output", required=True)

    return parser


def _cmd_costmap(args) -> int:
    from .cost_model import compute_cost_map
    from .image import read_image, save_matrix

    cm = compute_cost_map(read_image(args.image), sigma=args.sigma)
    save_matrix(args.output, cm.costs)
    print(f"wrote {args.output} ({cm.width}x{cm.height})")
    return 0


def _cmd_hist(args) -> int:
    from .histogram import BinningSpec, build_histogram
    from .image import load_matrix

    spec = BinningSpec(bin_count=args.bins, lo=args.lo, hi=args.hi)
    hist = build_histogram(load_matrix(args.costmap), spec)
    Path(args.output).write_text(hist.to_json() + "\n")
    print(f"wrote {args.output} (total {hist.total})")
    return 0


def _cmd_crop(args) -> int:
    from .cost_model import CostMap, compute_cost_map
    from .histogram import build_histogram, kl_sym, search_binning
    from .image import load_matrix, read_image
    from .smart_crop import smart_crop_2

    costs = CostMap(load_matrix(args.costmap))
    spec = search_binning(args.bins)
    result = smart_crop_2(costs, args.size, stride=args.stride, spec=spec, threads=args.threads)
    if args.recompute_final:
        if not args.image:
            raise NnidError("--recompute-final needs --image")
        pixels = read_image(args.image)
        crop = pixels[result.y : result.y + args.size, result.x : result.x + args.size]
        mother_hist = build_histogram(costs.costs, spec)
        crop_costs = compute_cost_map(crop)
        result.distance_recomputed = kl_sym(
            mother_hist, build_histogram(crop_costs.costs, spec)
        )
    Path(args.output).write_text(result.to_json() + "\n")
    print(
        f"crop ({result.x}, {result.y}) size {result.size} "
        f"distance {result.distance:.6g} over {result.evaluated} positions"
    )
    return 0


def _cmd_embed(args) -> int:
    from .cost_model import CostMap
    from .embedding import compute_change_probabilities, simulate_embedding
    from .image import load_matrix, read_image, write_image

    cover = read_image(args.cover)
    costs = CostMap(load_matrix(args.costmap))
    plan = compute_change_probabilities(costs, args.alpha * cover.size)
    stego = simulate_embedding(cover, plan, args.seed)
    write_image(args.output, stego)
    print(
        f"wrote {args.output} (lambda {plan.lam:.6g}, "
        f"{plan.realized_bits:.1f} of {plan.target_bits:.1f} bits)"
    )
    return 0


def _cmd_calibrate(args) -> int:
    from .calibration import DetectorOracle, calibrate_payload
    from .pipeline import DatasetManifest

    spec = args.detector
    if spec == "builtin":
        detector = DetectorOracle("builtin_residual")
    elif spec.startswith("synthetic"):
        slope = float(spec.split(":", 1)[1]) if ":" in spec else 1.0
        detector = DetectorOracle("builtin_synthetic", {"slope": slope})
    elif spec.startswith("cmd:"):
        detector = DetectorOracle("external_command", {"command": spec[4:]})
    else:
        raise NnidError(f"unknown detector spec {spec!r}")
    manifest = DatasetManifest.load(args.manifest) if args.manifest else None
    result = calibrate_payload(
        manifest,
        args.dim,
        detector,
        target_acc=args.target,
        tol_acc=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        probe_images=args.probe_images,
        workdir=args.workdir,
    )
    Path(args.output).write_text(result.to_json() + "\n")
    status = "converged" if result.converged else "NOT converged"
    print(
        f"alpha {result.alpha:.6g} at accuracy {result.achieved_accuracy:.4f} "
        f"({status}, {result.iterations} probes)"
    )
    return 0


def _cmd_synth_corpus(args) -> int:
    from .image import generate_synthetic_corpus

    paths = generate_synthetic_corpus(
        args.output, count=args.count, height=args.height, width=args.width, seed=args.seed
    )
    print(f"wrote {len(paths)} mothers under {args.output}")
    return 0


def _cmd_build_nnid(args) -> int:
    from .pipeline import PipelineConfig, assemble_splits, build_nnid, scaled_split_counts

    config = PipelineConfig(
        sigma=args.sigma,
        stride=args.stride,
        search_bins=args.bins,
        global_seed=args.seed,
        threads=args.threads,
        recompute_final=args.recompute_final,
    )
    manifests = build_nnid(args.mother_dir, tuple(args.sizes), args.output, config)
    if args.assemble_splits:
        pairs, train_images, val_images, test_pairs = scaled_split_counts(args.scale)
        for size, manifest in manifests.items():
            manifest = assemble_splits(manifest, pairs, train_images, val_images, test_pairs)
            manifest.save(Path(args.output) / f"UNI_{size}" / "manifest.json")
            manifests[size] = manifest
    for size, manifest in sorted(manifests.items()):
        print(
            f"UNI_{size}: {len(manifest.entries)} entries "
            f"(skipped {manifest.skipped_too_small} too small, "
            f"{len(manifest.skipped_undecodable)} undecodable)"
        )
    return 0


def _cmd_embed_dataset(args) -> int:
    from .pipeline import DatasetManifest, embed_dataset

    manifest = DatasetManifest.load(args.manifest)
    alpha_table = None
    if args.alpha_table:
        raw = json.loads(args.alpha_table)
        alpha_table = {int(k): float(v) for k, v in raw.items()}
    manifest = embed_dataset(
        manifest, alpha_table, seed=args.seed, sigma=args.sigma, threads=args.threads
    )
    manifest.save(args.manifest)
    done = sum(1 for e in manifest.entries if e.stego_path)
    print(f"embedded {done}/{len(manifest.entries)} entries; manifest updated")
    return 0


def _cmd_build_multi(args) -> int:
    from .pipeline import DEFAULT_PAIRS_PER_DIM, DatasetManifest, build_multi

    manifests = [DatasetManifest.load(p) for p in args.manifests]
    pairs_per_dim = args.pairs_per_dim
    if pairs_per_dim is None:
        pairs_per_dim = max(1, round(DEFAULT_PAIRS_PER_DIM * args.scale))
    multi = build_multi(
        manifests,
        pairs_per_dim=pairs_per_dim,
        seed=args.seed,
        out_root=Path(args.output).parent,
    )
    multi.save(args.output)
    print(f"MULTI: {len(multi.entries)} pairs -> {args.output}")
    return 0


def _cmd_report(args) -> int:
    from .histogram import search_binning
    from .pipeline import DatasetManifest, difficulty_report

    manifest = DatasetManifest.load(args.manifest)
    report = difficulty_report(
        manifest,
        mother_dir=args.mothers,
        baselines=args.baselines,
        spec=search_binning(args.bins),
        seed=args.seed,
    )
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0


def _cmd_dconv(args) -> int:
    from .dilated import DilatedKernel, dilated_conv2d
    from .image import load_matrix, save_matrix

    z = load_matrix(args.input)
    kernel = DilatedKernel(load_matrix(args.kernel), dilation=args.dilation)
    save_matrix(args.output, dilated_conv2d(z, kernel))
    print(f"wrote {args.output}")
    return 0


_COMMANDS = {
    "costmap": _cmd_costmap,
    "hist": _cmd_hist,
    "crop": _cmd_crop,
    "embed": _cmd_embed,
    "calibrate": _cmd_calibrate,
    "synth-corpus": _cmd_synth_corpus,
    "build-nnid": _cmd_build_nnid,
    "embed-dataset": _cmd_embed_dataset,
    "build-multi": _cmd_build_multi,
    "report": _cmd_report,
    "dconv": _cmd_dconv,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NnidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
