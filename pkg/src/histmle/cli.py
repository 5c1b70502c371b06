"""Command-line interface: ``histmle {enhance,fit,hist,synth,metrics}``.

Exit codes: 0 success, 1 pipeline/runtime failure, 2 usage error.
Artifacts (CSV/JSON) go to stdout unless ``--out`` is given; diagnostics
go to stderr, with verbosity from ``HISTMLE_LOG`` (off|info|debug).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import estimation
from .enhancement import (
    LEVELS,
    PipelineConfig,
    PipelineError,
    ShiftStrategy,
    enhance,
    fit_image,
)
from .estimation import GaussianMode, MixtureModel, check_stationarity
from .histogram import histogram_csv, image_histogram, level_grid, to_csv
from .image_core import PgmError, normalize, read_pgm, write_pgm
from .metrics import measure
from .synth import TWO_MODE, SynthSpec, synth_image
from .thresholding import midrange_threshold

log = logging.getLogger("histmle")

_LOG_LEVELS = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("HISTMLE_LOG", "off").lower()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("histmle")
    root.handlers[:] = [handler]
    root.setLevel(_LOG_LEVELS.get(level, logging.CRITICAL + 1))
    root.propagate = False


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _pivot(s: str):
    return s if s == "auto" else _positive_int(s)


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _mode(s: str) -> GaussianMode:
    try:
        w, m, sd = (float(p) for p in s.split(","))
        return GaussianMode(w, m, sd)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad mode {s!r} (want WEIGHT,MEAN,STD): {e}")


def _pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--modes", type=_positive_int, default=2, help="number of Gaussian modes K")
    p.add_argument("--estimator", choices=["em", "segmented"], default="em")
    p.add_argument("--strategy", choices=["full", "half"], default="half")
    p.add_argument("--pivot", type=_pivot, default="auto", help="last mode shifted left, or 'auto'")
    p.add_argument("--bins", type=_positive_int, default=256)
    p.add_argument("--tol", type=float, default=estimation.DEFAULT_TOL)
    p.add_argument("--max-iter", type=_positive_int, default=estimation.DEFAULT_MAX_ITER)
    p.add_argument(
        "--range",
        choices=["observed", "full"],
        default="observed",
        help="Min/Max for the shifts: observed pixel extremes or [0, 1]",
    )


def _config(args, parser) -> PipelineConfig:
    try:
        return PipelineConfig(
            modes=args.modes,
            estimator=args.estimator,
            strategy=ShiftStrategy(args.strategy),
            pivot=args.pivot,
            bins=args.bins,
            tol=args.tol,
            max_iter=args.max_iter,
            range=args.range,
        )
    except ValueError as e:
        parser.error(str(e))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _warn_narrow_range(field) -> None:
    v = field.flat()
    span = float(v.max() - v.min())
    if span < 0.1:
        print(
            f"warning: dynamic range {span:.4f} < 0.1; mean shifts depend on the "
            "image max/min and may be extreme",
            file=sys.stderr,
        )


def cmd_enhance(args, parser) -> int:
    config = _config(args, parser)
    image = read_pgm(args.input)
    _warn_narrow_range(normalize(image))
    result = enhance(image, config)
    write_pgm(args.output, result.enhanced)
    if args.report:
        x = normalize(image).flat()
        stat = check_stationarity(result.fit.model, x)
        Path(args.report).write_text(_dumps(result.report(stat)))
    if args.dump_hist:
        d = Path(args.dump_hist)
        d.mkdir(parents=True, exist_ok=True)
        (d / "source_hist.csv").write_text(to_csv(result.source_hist))
        grid = level_grid(LEVELS)
        n = image.width * image.height
        (d / "desired_hist.csv").write_text(
            histogram_csv(grid, result.desired * n, result.desired / grid.width)
        )
    return 0


def cmd_fit(args, parser) -> int:
    config = _config(args, parser)
    image = read_pgm(args.input)
    field = normalize(image)
    x = field.flat()
    try:
        hist = image_histogram(field, config.bins)
        threshold = midrange_threshold(field)
        if config.modes > 1 and np.ptp(x) < estimation.SIGMA_MIN:
            raise estimation.DegenerateVariance("image is constant; no modes to separate")
        report = fit_image(x, config, hist, threshold)
    except ValueError as e:
        raise PipelineError("estimation", e) from e
    out = report.to_dict()
    out["threshold"] = threshold
    out["stationarity"] = check_stationarity(report.model, x).to_dict()
    _emit(_dumps(out), args.out)
    return 0


def cmd_hist(args, parser) -> int:
    if args.bins < 2:
        parser.error("--bins must be >= 2")
    field = normalize(read_pgm(args.input))
    _emit(to_csv(image_histogram(field, args.bins)), args.out)
    return 0


def cmd_synth(args, parser) -> int:
    modes = args.mode or list(TWO_MODE.modes)
    try:
        model = MixtureModel(tuple(sorted(modes, key=lambda m: m.mean)))
        spec = SynthSpec(args.width, args.height, model, args.seed)
    except ValueError as e:
        parser.error(f"invalid synth spec: {e}")
    write_pgm(args.out, synth_image(spec))
    return 0


def cmd_metrics(args, parser) -> int:
    _emit(_dumps(measure(read_pgm(args.input)).to_dict()), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="histmle",
        description="Contrast enhancement by Gaussian-mixture MLE and histogram specification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="enhance a PGM image")
    p.add_argument("input")
    p.add_argument("output")
    _pipeline_args(p)
    p.add_argument("--report", help="write a JSON report here")
    p.add_argument("--dump-hist", help="directory for source/desired histogram CSVs")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("fit", help="fit the intensity mixture and print JSON")
    p.add_argument("input")
    _pipeline_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("hist", help="print the intensity histogram as CSV")
    p.add_argument("input")
    p.add_argument("--bins", type=_positive_int, default=256)
    p.add_argument("--out")
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("synth", help="write a seeded synthetic mixture image")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=_positive_int, default=256)
    p.add_argument("--height", type=_positive_int, default=256)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument(
        "--mode",
        type=_mode,
        action="append",
        metavar="W,MEAN,STD",
        help="mixture component; repeat per mode (default 0.5,0.3,0.05 and 0.5,0.7,0.05)",
    )
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("metrics", help="print contrast metrics as JSON")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (PgmError, OSError) as e:
        print(f"error: input: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
