"""``tsgc`` command line.

Exit codes: 0 success, 2 bad arguments, 3 I/O or file-format error,
4 segmentation or metric error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, _accel
from .errors import FormatError, MetricError, PhantomError, SegmentationError
from .features import MODES, parse_mode
from .graphbuild import parse_boundary
from .metrics import evaluate, tumor_region
from .phantom import PhantomConfig, generate
from .pipeline import SegmentationRequest, segment
from .volume_io import load_labels, load_mask, load_volume, read_pgm, render_labels, save_labels

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PIPELINE = 4


class UsageError(Exception):
    pass


def _odd_kernel(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if k < 1 or k % 2 == 0:
        raise argparse.ArgumentTypeError(f"smoothing kernel must be odd and >= 1, got {k}")
    return k


def _boundary(text: str):
    try:
        return parse_boundary(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like HxW, got {text!r}") from None
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("size must be positive")
    return h, w


def _add_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--volume", required=True, help="TSV time-series container")
    p.add_argument("--liver-mask", required=True)
    p.add_argument("--roi-healthy", required=True)
    p.add_argument("--roi-tumor", required=True)
    p.add_argument("--roi-vessel", required=True)
    p.add_argument("--boundary", type=_boundary, default="proposed", metavar="{proposed|gaussian:SIGMA}")
    p.add_argument("--full-image", action="store_true", help="cut the whole image, mask afterwards")
    p.add_argument("--smooth", type=_odd_kernel, default=None, metavar="K")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsgc", description="Time-series graph-cut liver tumor segmentation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment one slice into healthy/tumor/vessel")
    _add_inputs(p)
    p.add_argument("--mode", choices=sorted(MODES), default="timeseries")
    p.add_argument("--truth", help="optional label archive or mask to score against")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("evaluate", help="VOE / RVD / DSC of a label map against ground truth")
    p.add_argument("--labels", required=True, help="label archive PGM (values 0..3)")
    p.add_argument("--truth", required=True, help="label archive (max value <= 3) or binary mask")
    p.add_argument("--truth-mask", action="store_true", help="treat --truth as a mask even if its values are <= 3")
    p.add_argument("--include-vessel", action="store_true", help="score tumor and vessel labels together")
    p.add_argument("--json", dest="json_path", help="metrics JSON path (default: metrics.json beside --labels)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("phantom", help="write a synthetic phantom case")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, metavar="SIGMA")
    p.add_argument("--size", type=_size, default=(64, 64), metavar="HxW")
    p.add_argument("--timepoints", type=int, default=59)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("compare", help="run all feature modes and tabulate metrics")
    _add_inputs(p)
    p.add_argument("--truth", required=True)
    p.add_argument("--include-vessel", action="store_true")
    p.add_argument("--out", help="optional directory for per-mode labels and compare.json")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("replay", help="re-run a segment command from its manifest.json")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: the recorded one)")
    p.set_defaults(func=cmd_replay)
    return parser


def _read_request(args, mode) -> SegmentationRequest:
    return SegmentationRequest(
        volume=load_volume(args.volume),
        liver_mask=load_mask(args.liver_mask),
        roi_healthy=load_mask(args.roi_healthy),
        roi_tumor=load_mask(args.roi_tumor),
        roi_vessel=load_mask(args.roi_vessel),
        mode=mode,
        boundary=args.boundary,
        full_image=args.full_image,
        smoothing=args.smooth,
    )


def _truth_region(path, as_mask: bool, include_vessel: bool) -> np.ndarray:
    raw = read_pgm(path)
    if as_mask or raw.max(initial=0) > 3:
        return raw > 0
    return tumor_region(raw, include_vessel)


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _metric_row(name, m, seconds=None) -> str:
    row = f"{name:<12} {m['voe']:>8.2f} {m['rvd']:>8.2f} {m['dsc']:>8.4f}"
    if seconds is not None:
        row += f" {seconds:>10.3f}"
    return row


def cmd_segment(args) -> int:
    req = _read_request(args, parse_mode(args.mode))
    os.makedirs(args.out, exist_ok=True)
    result = segment(req)
    save_labels(result.labels, os.path.join(args.out, "labels.pgm"))
    render_labels(result.labels, os.path.join(args.out, "labels.ppm"))

    metrics = None
    if args.truth:
        truth = _truth_region(args.truth, False, False)
        metrics = evaluate(tumor_region(result.labels), truth)

    manifest = {
        "command": "segment",
        "inputs": {
            k: os.path.abspath(getattr(args, k))
            for k in ("volume", "liver_mask", "roi_healthy", "roi_tumor", "roi_vessel")
        },
        "truth": os.path.abspath(args.truth) if args.truth else None,
        "mode": args.mode,
        "boundary": str(args.boundary),
        "full_image": args.full_image,
        "smooth": args.smooth,
        "lambda": req.lam,
        "out": os.path.abspath(args.out),
        "elapsed_seconds": result.timings,
        "energy": {
            "stage1": result.stage1.energy.as_dict(),
            "stage2": result.stage2.energy.as_dict() if result.stage2 else None,
        },
        "flow": {
            "stage1": result.stage1.flow_value,
            "stage2": result.stage2.flow_value if result.stage2 else None,
        },
        "label_counts": {name: int((result.labels == i).sum()) for i, name in
                         enumerate(("background", "healthy", "tumor", "vessel"))},
        "metrics": metrics,
        "numba": _accel.HAS_NUMBA,
        "version": __version__,
    }
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    print(f"wrote {args.out}: tumor={manifest['label_counts']['tumor']} "
          f"vessel={manifest['label_counts']['vessel']} in {result.timings['total']:.2f}s")
    if metrics:
        print(_metric_row(args.mode, metrics))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    seg = tumor_region(load_labels(args.labels), args.include_vessel)
    truth = _truth_region(args.truth, args.truth_mask, args.include_vessel)
    if seg.shape != truth.shape:
        raise FormatError(f"labels {seg.shape} and truth {truth.shape} differ in size")
    metrics = evaluate(seg, truth)
    print(f"{'':<12} {'VOE(%)':>8} {'RVD(%)':>8} {'DSC':>8}")
    print(_metric_row("result", metrics))
    path = args.json_path or os.path.join(os.path.dirname(os.path.abspath(args.labels)), "metrics.json")
    _write_json(path, metrics)
    return EXIT_OK


def cmd_phantom(args) -> int:
    h, w = args.size
    if args.timepoints < 1:
        raise UsageError("--timepoints must be >= 1")
    if args.noise < 0:
        raise UsageError("--noise must be non-negative")
    cfg = PhantomConfig(height=h, width=w, timepoints=args.timepoints, seed=args.seed, noise_sigma=args.noise)
    try:
        case = generate(cfg)
    except PhantomError as exc:
        raise UsageError(f"invalid phantom geometry: {exc}") from None
    case.save(args.out, cfg)
    print(f"wrote phantom {h}x{w}x{args.timepoints} (seed {args.seed}, noise {args.noise:g}) to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    truth = _truth_region(args.truth, False, args.include_vessel)
    rows = {}
    print(f"{'mode':<12} {'VOE(%)':>8} {'RVD(%)':>8} {'DSC':>8} {'seconds':>10}")
    for name in ("timeseries", "multiscale", "median"):
        req = _read_request(args, parse_mode(name))
        t0 = time.perf_counter()
        result = segment(req)
        seconds = time.perf_counter() - t0
        seg = tumor_region(result.labels, args.include_vessel)
        if seg.shape != truth.shape:
            raise FormatError(f"truth {truth.shape} does not match volume {seg.shape}")
        metrics = evaluate(seg, truth)
        rows[name] = dict(metrics, seconds=seconds)
        print(_metric_row(name, metrics, seconds))
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            save_labels(result.labels, os.path.join(args.out, f"labels_{name}.pgm"))
            render_labels(result.labels, os.path.join(args.out, f"labels_{name}.ppm"))
    if args.out:
        _write_json(os.path.join(args.out, "compare.json"), rows)
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{args.manifest}: {exc}") from None
    if manifest.get("command") != "segment":
        raise FormatError("manifest does not describe a segment run")
    argv = ["segment"]
    for key, path in manifest["inputs"].items():
        argv += [f"--{key.replace('_', '-')}", path]
    argv += ["--mode", manifest["mode"], "--boundary", manifest["boundary"]]
    if manifest["full_image"]:
        argv.append("--full-image")
    if manifest["smooth"] is not None:
        argv += ["--smooth", str(manifest["smooth"])]
    if manifest.get("truth"):
        argv += ["--truth", manifest["truth"]]
    argv += ["--out", args.out or manifest["out"]]
    return main(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        _accel.set_threads()
    except ValueError as exc:
        print(f"tsgc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"tsgc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError) as exc:
        print(f"tsgc: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SegmentationError, MetricError) as exc:
        print(f"tsgc: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
