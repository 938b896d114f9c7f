"""Batch command-line front end.

Subcommands: blur-curve, render, estimate, evaluate, uncertainty.  Every
run writes a resolved-config echo next to its primary output so results
can be reproduced from the artifacts alone.  Exit codes: 0 success, 1
partial data failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

import dfdkit
from dfdkit import dataset as dset
from dfdkit import uncertainty as unc
from dfdkit.metrics import depth_histogram, metrics, per_depth_rms
from dfdkit.optics import CameraConfig, blur_curve
from dfdkit.render import render_dataset
from dfdkit.sidfd import EstimateParams, EstimationError, estimate_depth

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _echo_config(target, args: argparse.Namespace, extra: dict | None = None) -> None:
    """Write the resolved run configuration next to the primary output."""
    target = Path(target)
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    resolved["tool_version"] = dfdkit.__version__
    if extra:
        resolved.update(extra)
    if target.suffix:  # file output -> sibling echo
        echo = target.with_name(target.name + ".run.json")
    else:  # directory output
        target.mkdir(parents=True, exist_ok=True)
        echo = target / "run_config.json"
    _write_json(echo, resolved)


def _camera_from_args(args) -> CameraConfig:
    """Camera from --config JSON, with unit-bearing flags as overrides."""
    fields: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            fields = json.load(fh)
    if getattr(args, "focal_mm", None) is not None:
        fields["focal_length_m"] = args.focal_mm * 1e-3
    if getattr(args, "fnumber", None) is not None:
        fields["f_number"] = args.fnumber
    if getattr(args, "pitch_um", None) is not None:
        fields["pixel_pitch_m"] = args.pitch_um * 1e-6
    if getattr(args, "focus_m", None) is not None:
        fields["focus_distance_m"] = args.focus_m
    missing = {"focal_length_m", "f_number", "pixel_pitch_m", "focus_distance_m"} - fields.keys()
    if missing:
        raise ValueError(f"camera underspecified; missing {sorted(missing)} (use --config or flags)")
    return CameraConfig.from_dict(fields)


def _add_camera_flags(parser: argparse.ArgumentParser, require_config: bool = False) -> None:
    parser.add_argument("--config", required=require_config, help="camera config JSON")
    parser.add_argument("--focal-mm", type=float, dest="focal_mm", help="focal length override (mm)")
    parser.add_argument("--fnumber", type=float, help="f-number override")
    parser.add_argument("--pitch-um", type=float, dest="pitch_um", help="pixel pitch override (um)")
    parser.add_argument("--focus-m", type=float, dest="focus_m", help="focus distance override (m)")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_blur_curve(args) -> int:
    lo, hi = (float(v) for v in args.range_m.split(":"))
    config = _camera_from_args(args)
    curve = blur_curve(config, lo, hi, args.samples)
    curve.write_csv(args.out)
    _echo_config(args.out, args, {"camera": config.to_dict()})
    return EXIT_OK


def _cmd_render(args) -> int:
    config = _camera_from_args(args)
    report = render_dataset(args.manifest, config, args.out_dir, step_px=args.step_px)
    _write_json(Path(args.out_dir) / "summary.json", report)
    _echo_config(args.out_dir, args, {"camera": config.to_dict()})
    for entry in report["entries"]:
        if entry["status"] != "ok":
            print(f"render failed for {entry['entry']}: {entry['message']}", file=sys.stderr)
    return EXIT_OK if report["n_failed"] == 0 else EXIT_PARTIAL


def _cmd_estimate(args) -> int:
    config = _camera_from_args(args)
    params = EstimateParams(
        sigma0=args.sigma0,
        canny_low=args.canny_low,
        canny_high=args.canny_high,
        iterations=args.iterations,
        policy=args.policy,
        d_max=args.d_max,
    )
    img = dset.load_rgb(args.image)
    try:
        depth = estimate_depth(img, config, params)
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    dset.save_depth_png16(args.out, depth)
    sidecar = {"camera": config.to_dict(), "params": params.to_dict(), "tool_version": dfdkit.__version__}
    _write_json(Path(args.out).with_suffix(".json"), sidecar)
    _echo_config(args.out, args, {"camera": config.to_dict()})
    return EXIT_OK


def _parse_bins(spec: str) -> np.ndarray:
    lo, hi, n = spec.split(":")
    return np.linspace(float(lo), float(hi), int(n) + 1)


def _cmd_evaluate(args) -> int:
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    if not pred_dir.is_dir() or not gt_dir.is_dir():
        raise ValueError(f"prediction or ground-truth directory missing: {pred_dir}, {gt_dir}")
    exts = (".png", ".pfm")
    pred_files = {p.name: p for p in sorted(pred_dir.iterdir()) if p.suffix.lower() in exts}
    if not pred_files:
        raise ValueError(f"no depth files in {pred_dir}")
    edges = _parse_bins(args.bins)
    pooled_pred, pooled_gt, pooled_valid = [], [], []
    for name, pred_path in pred_files.items():
        gt_path = gt_dir / name
        if not gt_path.exists():
            raise ValueError(f"missing ground truth for {name}")
        pred, _ = dset.load_depth(pred_path)
        gt, gt_valid = dset.load_depth(gt_path)
        if pred.shape != gt.shape:
            raise ValueError(f"{name}: prediction {pred.shape} vs ground truth {gt.shape}")
        pooled_pred.append(pred.ravel())
        pooled_gt.append(gt.ravel())
        pooled_valid.append(gt_valid.ravel())
    pred = np.concatenate(pooled_pred)
    gt = np.concatenate(pooled_gt)
    valid = np.concatenate(pooled_valid)
    report = metrics(pred, gt, valid)
    bins = per_depth_rms(pred, gt, valid, edges)
    hist = depth_histogram(gt, valid, edges)
    out = Path(args.out)
    _write_json(
        out,
        {
            "metrics": report.to_dict(),
            "per_depth_rms": bins.to_dict(),
            "depth_histogram": hist.to_dict(),
            "n_images": len(pred_files),
        },
    )
    report.write_csv(out.with_suffix(".csv"))
    _echo_config(out, args)
    return EXIT_OK


def _cmd_uncertainty(args) -> int:
    samples_dir = Path(args.samples_dir)
    if not samples_dir.is_dir():
        raise ValueError(f"samples directory missing: {samples_dir}")
    exts = (".png", ".pfm")
    files = [p for p in sorted(samples_dir.iterdir()) if p.suffix.lower() in exts]
    if not files:
        raise ValueError(f"no depth samples in {samples_dir}")
    stack = [dset.load_depth(p)[0] for p in files]
    mean, variance = unc.aggregate(stack)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dset.write_pfm(out_dir / "mean.pfm", mean)
    dset.write_pfm(out_dir / "variance.pfm", variance)
    meta = {
        "n_samples": len(files),
        "variance_convention": unc.VARIANCE_CONVENTION,
        "tool_version": dfdkit.__version__,
    }
    if args.gt:
        gt, gt_valid = dset.load_depth(args.gt)
        err = unc.mean_error(mean, gt, gt_valid)
        dset.write_pfm(out_dir / "mean_error.pfm", err)
        meta["mean_error"] = "mean_error.pfm"
    _write_json(out_dir / "meta.json", meta)
    _echo_config(out_dir, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfdkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("blur-curve", help="emit a blur-vs-depth CSV for a camera")
    _add_camera_flags(p)
    p.add_argument("--range-m", default="0.5:10", dest="range_m", help="depth range lo:hi (m)")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_blur_curve)

    p = sub.add_parser("render", help="render defocused images for a manifest")
    p.add_argument("--manifest", required=True, help="CSV rgb_path,depth_path,split")
    _add_camera_flags(p)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--step-px", type=float, default=0.25, dest="step_px")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("estimate", help="estimate depth from one defocused image")
    p.add_argument("--image", required=True)
    _add_camera_flags(p)
    p.add_argument("--policy", choices=("near", "far"), default="near")
    p.add_argument("--out", required=True, help="output 16-bit mm depth PNG")
    p.add_argument("--sigma0", type=float, default=1.0)
    p.add_argument("--canny-low", type=float, default=0.1, dest="canny_low")
    p.add_argument("--canny-high", type=float, default=0.2, dest="canny_high")
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--d-max", type=float, default=10.0, dest="d_max")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("evaluate", help="score predicted depth maps against ground truth")
    p.add_argument("--pred-dir", required=True, dest="pred_dir")
    p.add_argument("--gt-dir", required=True, dest="gt_dir")
    p.add_argument("--bins", default="0:10:20", help="depth bins lo:hi:count")
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("uncertainty", help="aggregate a directory of depth samples")
    p.add_argument("--samples-dir", required=True, dest="samples_dir")
    p.add_argument("--gt", help="optional ground-truth depth for a mean-error map")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.set_defaults(func=_cmd_uncertainty)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage already
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
