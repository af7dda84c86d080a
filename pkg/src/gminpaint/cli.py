"""Command-line interface.

Exit codes: 0 success, 1 unexpected error, 2 usage error, 3 bad input
(unreadable or inconsistent files, invalid masks), 4 numerical failure,
5 stopped at the iteration cap while ``--strict-convergence`` was given.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .baseline import BaselineConfig, energy_trace_text, run_baseline
from .engine import EngineConfig, run
from .errors import InpaintError, NumericalFailure
from .gaussmix import WeightMode
from .imageio import GrayImage, corrupt, load_image, load_mask, save_image, save_mask
from .masks import STYLES, make_mask
from .metrics import psnr, ssim
from .prior import EXPERT_WEIGHTS, default_model, learn_prior, load_model, save_model

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4
EXIT_NOT_CONVERGED = 5

IMAGE_SUFFIXES = (".pgm", ".png")

log = logging.getLogger("gminpaint")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _fraction(text):
    value = float(text)
    if not 0 < value <= 0.5:
        raise argparse.ArgumentTypeError(f"coverage must lie in (0, 0.5], got {text}")
    return value


def _db(v):
    return "inf" if v == float("inf") else f"{v:.4f}"


def _model(path):
    return default_model() if path is None else load_model(path)


def _write_text(path, text):
    Path(path).write_text(text, encoding="utf-8")


# -- subcommands ----------------------------------------------------------------


def cmd_learn_prior(args, out):
    folder = Path(args.images)
    if not folder.is_dir():
        raise FileNotFoundError(f"no such directory: {folder}")
    paths = sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise FileNotFoundError(f"no .pgm or .png images in {folder}")
    images = [load_image(p) for p in paths]
    model = learn_prior(images, n_patches=args.patches, em_samples=args.em_samples, k=args.k, seed=args.seed)
    save_model(model, args.out)
    print(f"# learned from {len(images)} images, {args.patches} patches, {args.em_samples} EM samples", file=out)
    print(f"# dropped component |cos| with uniform patch: {model.filter_bank.dc_cosine:.6f}", file=out)
    print("filter\tnorm\tkurtosis\tcoefficients", file=out)
    for n, f in enumerate(model.filter_bank):
        kurt = model.metadata["kurtosis"][n]
        print(f"{n}\t{sum(v * v for v in f) ** 0.5:.6f}\t{kurt:.4f}\t" + ",".join(f"{v:.6f}" for v in f), file=out)
    print("filter\tcomponent\tweight\tmean\tsigma", file=out)
    for n, comps in enumerate(model.experts):
        for m, g in enumerate(comps):
            print(f"{n}\t{m}\t{g.weight:.6f}\t{g.mean:.6f}\t{g.sigma:.6f}", file=out)
    if args.figure:
        from .plotting import mixture_figure

        mixture_figure(args.figure, model)
    return EXIT_OK


def cmd_inpaint(args, out):
    img = load_image(args.image)
    mask = load_mask(args.mask)
    mask.check_matches(img)
    reference = load_image(args.report_psnr_against) if args.report_psnr_against else None
    if reference is not None:
        mask.check_matches(reference)
    model = _model(args.model)
    if args.gaussians:
        model = model.with_components(args.gaussians)
    cfg = EngineConfig(
        weight_mode=args.weight_mode,
        max_components=args.max_components,
        iterations=args.iterations,
        convergence_tol=args.tol,
        schedule=args.schedule,
        pixel_reduce=args.pixel_reduce,
        synchronous=args.synchronous,
        workers=args.workers,
        expert_weights=args.expert_weights,
        cluster=args.cluster,
    )
    if args.graph_dump and mask.count:
        from .graph import build_graph, dump_graph

        _write_text(args.graph_dump, dump_graph(build_graph(img, mask)))
    result, stats = run(img, mask, model, cfg)
    save_image(result, args.out)
    if args.stats:
        _write_text(args.stats, stats.to_text(timing=args.stats_timing))

    print(f"# schedule={stats.schedule} unknown={stats.n_unknown} stop={stats.stop_reason}", file=out)
    rows = []
    if reference is not None:
        print("iteration\tmean_change\tmax_change\twall_time_s\tpsnr_whole\tpsnr_region\tssim", file=out)
        if mask.count:
            cor = corrupt(img, mask)
            print(f"0\t-\t-\t-\t{_db(psnr(reference, cor))}\t{_db(psnr(reference, cor, mask))}\t"
                  f"{ssim(reference, cor):.4f}", file=out)
        for it in stats.iterations:
            est = _iteration_image(stats, img, it.iteration)
            whole, region = psnr(reference, est), psnr(reference, est, mask)
            s = ssim(reference, est)
            rows.append((it.iteration, whole, region, s))
            print(f"{it.iteration}\t{it.mean_change:.4f}\t{it.max_change:.4f}\t{it.wall_time:.3f}\t"
                  f"{_db(whole)}\t{_db(region)}\t{s:.4f}", file=out)
    else:
        print("iteration\tmean_change\tmax_change\twall_time_s", file=out)
        for it in stats.iterations:
            print(f"{it.iteration}\t{it.mean_change:.4f}\t{it.max_change:.4f}\t{it.wall_time:.3f}", file=out)
    if args.figure:
        from .plotting import inpaint_figure

        inpaint_figure(args.figure, corrupt(img, mask), result, mask, reference)
    if args.psnr_figure and rows:
        from .plotting import psnr_figure

        psnr_figure(args.psnr_figure, rows)
    if args.strict_convergence and stats.stop_reason == "iteration_cap":
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _iteration_image(stats, img, iteration):
    # the quantized image actually written for that iteration
    return GrayImage(stats.image_at(img, iteration).quantized().astype(float))


def cmd_baseline(args, out):
    img = load_image(args.image)
    mask = load_mask(args.mask)
    model = _model(args.model)
    cfg = BaselineConfig(alphas=args.alphas, step_size=args.step_size, iterations=args.iterations)
    result, trace, per_iter = run_baseline(img, mask, model.filter_bank, cfg)
    save_image(result, args.out)
    if args.energy:
        _write_text(args.energy, energy_trace_text(trace))
    print(f"# iterations={cfg.iterations} step={cfg.step_size} seconds_per_iteration={per_iter:.6f}", file=out)
    if len(trace):
        print(f"final_log_prior\t{trace[-1]:.6f}", file=out)
    if args.report_psnr_against:
        ref = load_image(args.report_psnr_against)
        q = result.quantized().astype(float)
        print(f"psnr_whole\t{_db(psnr(ref, q))}", file=out)
        if mask.count:
            print(f"psnr_region\t{_db(psnr(ref, q, mask))}", file=out)
        print(f"ssim\t{ssim(ref, q):.4f}", file=out)
    if args.figure and len(trace):
        from .plotting import energy_figure

        energy_figure(args.figure, trace)
    return EXIT_OK


def cmd_metrics(args, out):
    ref = load_image(args.reference)
    test = load_image(args.test)
    print(f"psnr_whole\t{_db(psnr(ref, test))}", file=out)
    if args.mask:
        mask = load_mask(args.mask)
        print(f"psnr_region\t{_db(psnr(ref, test, mask))}", file=out)
    print(f"ssim\t{ssim(ref, test):.4f}", file=out)
    return EXIT_OK


def cmd_make_mask(args, out):
    mask = make_mask(args.width, args.height, args.style, args.coverage, args.seed)
    save_mask(mask, args.out)
    print(f"unknown\t{mask.count}", file=out)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="gminpaint", description="Inpainting with Gaussian-mixture belief propagation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr (-vv for debug)")
    sub = p.add_subparsers(dest="command", required=True)

    lp = sub.add_parser("learn-prior", help="learn filters and expert mixtures from a directory of images")
    lp.add_argument("--images", required=True, help="directory of 8-bit grayscale .pgm/.png images")
    lp.add_argument("--patches", type=_positive_int, default=50_000)
    lp.add_argument("--em-samples", type=_positive_int, default=5_000)
    lp.add_argument("--k", type=_positive_int, default=3, help="Gaussians per expert")
    lp.add_argument("--seed", type=int, default=0)
    lp.add_argument("--out", required=True, help="model file to write (JSON)")
    lp.add_argument("--figure", help="also plot the expert mixtures to this file")
    lp.set_defaults(func=cmd_learn_prior)

    ip = sub.add_parser("inpaint", help="fill the masked pixels of an image")
    ip.add_argument("--image", required=True)
    ip.add_argument("--mask", required=True, help="mask image; pixels >= 128 are unknown")
    ip.add_argument("--model", help="prior model file (default: the bundled model)")
    ip.add_argument("--gaussians", type=_positive_int, help="keep only this many Gaussians per expert")
    ip.add_argument("--iterations", type=_positive_int, default=3)
    ip.add_argument("--max-components", type=_positive_int, default=1)
    ip.add_argument("--weight-mode", choices=[m.value for m in WeightMode], default=WeightMode.PAPER.value)
    ip.add_argument("--expert-weights", choices=EXPERT_WEIGHTS, default="density")
    ip.add_argument("--schedule", choices=["auto", "two_pass", "loopy"], default="auto")
    ip.add_argument("--cluster", choices=["full", "valid"], default="full",
                    help="loopy message graph; 'valid' keeps each pixel on a tree of edges")
    ip.add_argument("--tol", type=float, default=0.1, help="convergence threshold in gray levels")
    ip.add_argument("--pixel-reduce", choices=["lowest", "mean"], default="lowest")
    ip.add_argument("--synchronous", action="store_true", help="read messages from the previous iteration only")
    ip.add_argument("--workers", type=_positive_int, default=1, help="threads for --synchronous sweeps")
    ip.add_argument("--out", required=True)
    ip.add_argument("--stats", help="write per-iteration statistics (TSV) here")
    ip.add_argument("--stats-timing", action="store_true", help="include wall times in the --stats file")
    ip.add_argument("--report-psnr-against", metavar="REFERENCE", help="print PSNR/SSIM per iteration")
    ip.add_argument("--graph-dump", help="write the clique graph (TSV) here")
    ip.add_argument("--figure", help="render corrupted/result/reference panels to this file")
    ip.add_argument("--psnr-figure", help="plot PSNR per iteration (needs --report-psnr-against)")
    ip.add_argument("--strict-convergence", action="store_true",
                    help=f"exit {EXIT_NOT_CONVERGED} when the iteration cap is hit before convergence")
    ip.set_defaults(func=cmd_inpaint)

    bp = sub.add_parser("baseline", help="gradient-ascent inpainting under the Student-t prior")
    bp.add_argument("--image", required=True)
    bp.add_argument("--mask", required=True)
    bp.add_argument("--model", help="prior model whose filters are used (default: bundled)")
    bp.add_argument("--iterations", type=int, default=2500)
    bp.add_argument("--step-size", type=float, default=0.1)
    bp.add_argument("--alphas", type=float, nargs="+", help="per-filter weights (default 1.0 each)")
    bp.add_argument("--out", required=True)
    bp.add_argument("--energy", help="write the per-iteration log prior (TSV) here")
    bp.add_argument("--report-psnr-against", metavar="REFERENCE")
    bp.add_argument("--figure", help="plot the energy trace to this file")
    bp.set_defaults(func=cmd_baseline)

    mp = sub.add_parser("metrics", help="PSNR and SSIM between two images")
    mp.add_argument("reference")
    mp.add_argument("test")
    mp.add_argument("--mask", help="also report PSNR over the mask's unknown pixels")
    mp.set_defaults(func=cmd_metrics)

    kp = sub.add_parser("make-mask", help="generate a synthetic mask")
    kp.add_argument("--width", type=_positive_int, required=True)
    kp.add_argument("--height", type=_positive_int, required=True)
    kp.add_argument("--style", choices=STYLES, default="scratch")
    kp.add_argument("--coverage", type=_fraction, default=0.05)
    kp.add_argument("--seed", type=int, default=0)
    kp.add_argument("--out", required=True)
    kp.set_defaults(func=cmd_make_mask)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except NumericalFailure as exc:
        print(f"gminpaint: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InpaintError, OSError, ValueError) as exc:
        print(f"gminpaint: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - last resort
        log.exception("unexpected error")
        print(f"gminpaint: unexpected error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
