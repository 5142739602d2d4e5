"""toposeg command line: synth, denoise, segment, pipeline, evaluate.

Exit codes: 0 success, 1 runtime or I/O failure, 2 invalid arguments.
Progress goes to stderr; reports and ``evaluate`` rows go to files/stdout.
"""
import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diffusion import (
    DEFAULT_KAPPA, DEFAULT_TAU, G_TYPES, DiffusionParams, anisotropic_filter, isotropic_filter,
)
from .image import (
    SYNTH_KINDS, NoiseSpec, SyntheticSpec, add_gaussian_noise, load_image, make_synthetic,
    save_image,
)
from .metrics import MetricsReport, boundary_f1, mse, psnr, region_count, write_report
from .segmentation import (
    continuum_td_segment, extract_segmentation, read_label_grid, segmentation_from_image,
    write_label_grid, write_label_pgm,
)
from .topo import TopoParams, discrete_td_restore, write_crackset

DEFAULT_THRESHOLD = -0.005
PIPELINE_PREFILTER_ITERS = 2
_TOPO_DEFAULTS = TopoParams()


class UsageError(Exception):
    """Bad flag values detected after parsing; maps to exit code 2."""


class _Progress:
    def __init__(self, quiet):
        self.quiet = quiet

    def __call__(self, msg):
        if not self.quiet:
            print(msg, file=sys.stderr)


# -- parameter assembly ---------------------------------------------------------

def _diffusion_params(args, iters=None):
    try:
        return DiffusionParams(
            tau=args.tau, iters=args.iters if iters is None else iters,
            kappa=args.kappa, g_type=args.g_type,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _topo_params(args):
    try:
        return TopoParams(
            crack_fraction=args.crack_fraction,
            crack_budget=args.crack_budget,
            min_derivative_magnitude=args.min_derivative,
            outer_iters=args.outer_iters,
            inner_diffusion_iters=args.inner_iters,
            tau=args.td_tau,
            min_region_size=args.min_region_size,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_threshold(args):
    if not args.threshold < 0:
        raise UsageError(f"--threshold must be < 0, got {args.threshold}")


def _method_label(args):
    if args.method == "continuum":
        return f"continuum:threshold={args.threshold!r}"
    return "discrete"


def _filter_label(name, params):
    if name == "anisotropic":
        return f"anisotropic:{params.g_type}:kappa={params.kappa!r}"
    return name


def _apply_filter(name, img, params):
    if name == "isotropic":
        return isotropic_filter(img, params)
    if name == "anisotropic":
        return anisotropic_filter(img, params)
    return img.copy()


def _segment(img, args, topo):
    """Returns (labels, restored image, crack field or None, trace or None)."""
    if args.method == "discrete":
        restored, kf, trace = discrete_td_restore(img, topo)
        labels = extract_segmentation(kf, topo.min_region_size, restored)
        return labels, restored, kf, trace
    labels = continuum_td_segment(img, args.threshold, args.min_region_size)
    return labels, img, None, None


def _load_truth(path):
    path = Path(path)
    if path.suffix.lower() == ".txt":
        return read_label_grid(path)
    return segmentation_from_image(load_image(path))


def _emit(reports, args):
    if args.report:
        write_report(reports, args.report, args.format)


# -- commands -----------------------------------------------------------------

def cmd_synth(args):
    try:
        spec = SyntheticSpec(args.kind, args.width, args.height, args.low, args.high)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_image(make_synthetic(spec), args.output)
    args.progress(f"wrote {args.kind} {args.width}x{args.height} -> {args.output}")
    return 0


def cmd_denoise(args):
    params = _diffusion_params(args)
    img = load_image(args.input)
    t0 = time.perf_counter()
    out = _apply_filter(args.filter, img, params)
    wall = (time.perf_counter() - t0) * 1e3
    save_image(out, args.output)
    args.progress(f"{args.filter} filter, {params.iters} iterations -> {args.output}")
    if args.report:
        rep = MetricsReport(stage="denoise", method=_filter_label(args.filter, params),
                            iteration=params.iters, wall_time_ms=wall)
        if args.reference:
            ref = load_image(args.reference)
            rep.mse = mse(out, ref)
            rep.psnr_db = psnr(out, ref)
        _emit([rep], args)
    return 0


def cmd_segment(args):
    topo = _topo_params(args)
    if args.method == "continuum":
        _check_threshold(args)
    img = load_image(args.input)
    truth = _load_truth(args.truth) if args.truth else None
    t0 = time.perf_counter()
    labels, restored, kf, trace = _segment(img, args, topo)
    wall = (time.perf_counter() - t0) * 1e3
    write_label_grid(labels, args.labels)
    view = args.view or str(Path(args.labels).with_suffix(".pgm"))
    write_label_pgm(labels, view)
    if kf is not None and args.cracks:
        write_crackset(kf.cracked(), args.cracks)
    n_regions = region_count(labels)
    args.progress(f"{args.method} segmentation: {n_regions} regions -> {args.labels}")
    rep = MetricsReport(
        stage="segment", method=_method_label(args),
        iteration=len(trace) if trace is not None else 1,
        cracks_total=kf.n_cracked() if kf is not None else 0,
        regions=n_regions, wall_time_ms=wall,
    )
    if truth is not None:
        if truth.shape != labels.shape:
            raise ValueError(f"truth shape {truth.shape} does not match image {labels.shape}")
        rep.boundary_f1 = boundary_f1(labels, truth, args.tol)
    _emit([rep], args)
    return 0


def _pipeline_stage(stage, img, clean, truth, args, topo, outdir, prefilter, dparams):
    t0 = time.perf_counter()
    work = _apply_filter(prefilter, img, dparams)
    labels, restored, kf, trace = _segment(work, args, topo)
    wall = (time.perf_counter() - t0) * 1e3
    if prefilter != "none":
        save_image(work, outdir / f"{stage}_filtered.pgm")
    save_image(restored, outdir / f"{stage}_restored.pgm")
    write_label_grid(labels, outdir / f"{stage}_labels.txt")
    write_label_pgm(labels, outdir / f"{stage}_labels.pgm")
    if kf is not None:
        write_crackset(kf.cracked(), outdir / f"{stage}_cracks.txt")
        trace.to_csv(outdir / f"{stage}_trace.csv")
    method = _method_label(args)
    if prefilter != "none":
        method = f"{_filter_label(prefilter, dparams)}+{method}"
    rep = MetricsReport(
        stage=stage, method=method,
        iteration=len(trace) if trace is not None else 1,
        mse=mse(restored, clean), psnr_db=psnr(restored, clean),
        cracks_total=kf.n_cracked() if kf is not None else 0,
        regions=region_count(labels),
        boundary_f1=boundary_f1(labels, truth, args.tol),
        wall_time_ms=wall,
    )
    args.progress(
        f"{stage}: regions={rep.regions} boundary_f1={rep.boundary_f1:.4f} "
        f"psnr={rep.psnr_db:.2f} dB (255-peak: {psnr(restored * 255, clean * 255, 255.0):.2f} dB)")
    return rep


def cmd_pipeline(args):
    topo = _topo_params(args)
    if args.method == "continuum":
        _check_threshold(args)
    dparams = _diffusion_params(args)
    try:
        noise = NoiseSpec(args.noise_sigma, args.seed)
        synth = None
        if args.input is None:
            synth = SyntheticSpec(args.synthetic, args.width, args.height)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    clean = load_image(args.input) if args.input else make_synthetic(synth)
    truth = _load_truth(args.truth) if args.truth else segmentation_from_image(clean)
    if truth.shape != clean.shape:
        raise ValueError(f"truth shape {truth.shape} does not match image {clean.shape}")
    noisy = add_gaussian_noise(clean, noise)
    save_image(clean, outdir / "clean.pgm")
    save_image(noisy, outdir / "noisy.pgm")
    args.progress(f"noisy input: psnr={psnr(noisy, clean):.2f} dB (sigma={noise.sigma}, seed={noise.seed})")

    plan = []
    if args.compare or args.prefilter == "none":
        plan.append(("segment-only", "none"))
    if args.prefilter != "none":
        plan.append(("restore-then-segment", args.prefilter))
    reports = [
        _pipeline_stage(stage, noisy, clean, truth, args, topo, outdir, pf, dparams)
        for stage, pf in plan
    ]
    report_path = Path(args.report or f"report.{args.format}")
    if not report_path.is_absolute():
        report_path = outdir / report_path
    write_report(reports, report_path, args.format)
    return 0


EVAL_METRICS = ("mse", "psnr")


def cmd_evaluate(args):
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    bad = [m for m in wanted if m not in EVAL_METRICS]
    if bad or not wanted:
        raise UsageError(f"--metrics accepts a comma list of {EVAL_METRICS}, got {args.metrics!r}")
    if not args.max_val > 0:
        raise UsageError(f"--max-val must be > 0, got {args.max_val}")
    a = load_image(args.a)
    b = load_image(args.b)
    header, row = [], []
    for m in wanted:
        if m == "mse":
            header.append("mse")
            row.append(repr(mse(a, b)))
        else:
            value = psnr(a, b, args.max_val)
            header.append("psnr_db")
            row.append("inf" if math.isinf(value) else repr(value))
    print(",".join(header))
    print(",".join(row))
    return 0


# -- parser ---------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--quiet", action="store_true", help="suppress progress lines on stderr")
    p.add_argument("--config", help="key=value file supplying defaults for this command")


def _add_report(p, required=False):
    p.add_argument("--report", required=required, help="report file (rows are appended)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_diffusion(p, iters):
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--iters", type=int, default=iters)
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--g-type", choices=G_TYPES, default="pm1")


def _add_segmentation(p):
    d = _TOPO_DEFAULTS
    p.add_argument("--method", choices=("discrete", "continuum"), default="discrete")
    p.add_argument("--crack-fraction", type=float, default=d.crack_fraction)
    p.add_argument("--crack-budget", type=float, default=d.crack_budget)
    p.add_argument("--min-derivative", type=float, default=d.min_derivative_magnitude)
    p.add_argument("--outer-iters", type=int, default=d.outer_iters)
    p.add_argument("--inner-iters", type=int, default=d.inner_diffusion_iters)
    p.add_argument("--td-tau", type=float, default=d.tau, help="time step of cracked diffusion")
    p.add_argument("--min-region-size", type=int, default=d.min_region_size)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="continuum indicator cutoff (< 0)")
    p.add_argument("--tol", type=int, default=1, help="boundary match tolerance in pixels")


def build_parser():
    parser = argparse.ArgumentParser(prog="toposeg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic test image")
    _add_common(p)
    p.add_argument("--kind", choices=SYNTH_KINDS, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--low", type=float, default=0.2)
    p.add_argument("--high", type=float, default=0.8)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("denoise", help="isotropic or anisotropic diffusion")
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--filter", choices=("isotropic", "anisotropic"), required=True)
    _add_diffusion(p, iters=20)
    p.add_argument("--reference", help="clean image to score the output against")
    _add_report(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("segment", help="topological-derivative segmentation")
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--labels", required=True, help="lossless label grid output (text)")
    p.add_argument("--view", help="viewable label PGM (default: labels path with .pgm)")
    p.add_argument("--cracks", help="crack set output (discrete method)")
    p.add_argument("--truth", help="ground truth: label grid .txt or piecewise-constant image")
    _add_segmentation(p)
    _add_report(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("pipeline", help="noise, optional restoration, segmentation, scoring")
    _add_common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="clean source image")
    src.add_argument("--synthetic", choices=SYNTH_KINDS, default="step")
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--truth", help="ground truth (default: constant-intensity regions of the source)")
    p.add_argument("--noise-sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--prefilter", choices=("none", "isotropic", "anisotropic"), default="isotropic")
    _add_diffusion(p, iters=PIPELINE_PREFILTER_ITERS)
    _add_segmentation(p)
    p.add_argument("--compare", action="store_true",
                   help="also run without the prefilter and report both")
    p.add_argument("--output-dir", required=True)
    _add_report(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("evaluate", help="print MSE/PSNR between two images as CSV")
    _add_common(p)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--metrics", default="mse,psnr")
    p.add_argument("--max-val", type=float, default=1.0)
    p.set_defaults(func=cmd_evaluate)
    return parser


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_config(path):
    """Parse ``key = value`` lines; '#' starts a comment, keys use - or _."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _config_defaults(subparser, values):
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            low = raw.lower()
            if low not in _TRUE | _FALSE:
                raise UsageError(f"config key {key!r} needs a boolean, got {raw!r}")
            defaults[key] = low in _TRUE
        else:
            if action.choices is not None and raw not in action.choices:
                raise UsageError(f"config key {key!r}: {raw!r} not in {list(action.choices)}")
            defaults[key] = action.type(raw) if action.type else raw
        action.required = False
    return defaults


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # config values become parser defaults, so explicit flags still win
        config_path = _find_config(argv)
        if config_path is not None:
            sub = _subparser_for(parser, argv)
            sub.set_defaults(**_config_defaults(sub, read_config(config_path)))
        args = parser.parse_args(argv)
        args.progress = _Progress(args.quiet)
        return args.func(args)
    except SystemExit as exc:
        return exc.code
    except UsageError as exc:
        print(f"toposeg: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"toposeg: error: {exc}", file=sys.stderr)
        return 1


def _find_config(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _subparser_for(parser, argv):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for tok in argv:
                if tok in action.choices:
                    return action.choices[tok]
    raise UsageError("no subcommand given")


if __name__ == "__main__":
    sys.exit(main())
