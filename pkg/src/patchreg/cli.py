"""Command-line front end: register image pairs, apply warps, report metrics, make fixtures.

Exit codes: 0 success, 2 argument errors, 3 I/O errors, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as vio
from .cascade import CascadeConfig, register
from .flow import FlowConfig, jacobian_determinant
from .grid import warp_volume
from .metrics import dice, jacobian_report, warp_labels
from .ncc import NccConfig, ncc_value
from .optimizer import OptimConfig
from .report import write_report
from .synth import make_blobs, make_ellipsoid, make_sphere

log = logging.getLogger("patchreg")

_EXIT_ARGS = 2
_EXIT_IO = 3
_EXIT_NUMERIC = 4


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads across patches")
    parser.add_argument("--seed", type=int, default=42, help="RNG seed for synthetic data")
    parser.add_argument("--format", choices=("nii", "rawvol"), default="nii",
                        help="output format when a path has no recognised extension")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")


def _parse_floats(text: str):
    return tuple(float(tok) for tok in text.split(","))


def _parse_dims(text: str):
    dims = tuple(int(tok) for tok in text.split(","))
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"bad dims {text!r}, expected X,Y,Z")
    return dims


def _ensure_ext(path: str, fmt: str) -> str:
    if path.endswith((".nii", ".nii.gz", ".rawvol")):
        return path
    return f"{path}.{ 'nii' if fmt == 'nii' else 'rawvol' }"


def _with_tag(path: str, tag: str) -> str:
    for ext in (".nii.gz", ".nii", ".rawvol"):
        if path.endswith(ext):
            return path[: -len(ext)] + f".{tag}" + ext
    return f"{path}.{tag}"


def _minmax_normalise(img: np.ndarray) -> np.ndarray:
    lo, hi = float(img.min()), float(img.max())
    if hi <= lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchreg",
        description="Patch-based diffeomorphic 3D registration with spectral velocity smoothing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p_reg = sub.add_parser("register", formatter_class=fmt,
                           help="register a moving volume onto a fixed volume")
    p_reg.add_argument("--moving", required=True, help="moving image path")
    p_reg.add_argument("--fixed", required=True, help="fixed image path")
    p_reg.add_argument("--out-warp", required=True,
                       help="output displacement field; writes .fwd/.inv pair unless --forward-only")
    p_reg.add_argument("--out-image", help="optional warped moving image path")
    p_reg.add_argument("--metrics", help="optional metrics JSON path")
    p_reg.add_argument("--forward-only", action="store_true",
                       help="write a single forward field exactly at --out-warp")
    p_reg.add_argument("--alphas", type=_parse_floats, default=(0.01, 0.005, 0.001),
                       help="per-stage smoothness weights, strictly decreasing")
    p_reg.add_argument("--sigma", type=float, default=0.001, help="similarity weight 1/(2*sigma^2)")
    p_reg.add_argument("--lambda", dest="lam", type=float, default=1.0,
                       help="regularity weight in the reported loss")
    p_reg.add_argument("--ncc-window", type=int, default=7, help="local correlation window side")
    p_reg.add_argument("--patch", type=int, default=64, help="patch side length")
    p_reg.add_argument("--core", type=int, default=32, help="fused core side length")
    p_reg.add_argument("--steps", type=int, default=8, help="flow integration steps")
    p_reg.add_argument("--iters", type=int, default=100, help="max optimiser iterations per patch")
    p_reg.add_argument("--step-size", type=float, default=OptimConfig.step_size,
                       help="optimiser step size")
    _common_flags(p_reg)

    p_warp = sub.add_parser("warp", formatter_class=fmt, help="apply a displacement field")
    p_warp.add_argument("--in", dest="input", required=True, help="image or labels to warp")
    p_warp.add_argument("--warp", required=True, help="displacement field path")
    p_warp.add_argument("--out", required=True, help="output path")
    p_warp.add_argument("--labels", action="store_true",
                        help="treat input as labels (nearest-neighbour resampling)")
    _common_flags(p_warp)

    p_rep = sub.add_parser("report", formatter_class=fmt,
                           help="evaluate a warp (and optional label overlap)")
    p_rep.add_argument("--warp", required=True, help="displacement field path")
    p_rep.add_argument("--fixed-labels", help="fixed label volume")
    p_rep.add_argument("--warped-labels", help="warped moving label volume")
    p_rep.add_argument("--out", required=True, help="metrics JSON path (CSV/figures go alongside)")
    p_rep.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    _common_flags(p_rep)

    p_syn = sub.add_parser("synth", formatter_class=fmt,
                           help="generate synthetic image+label fixtures")
    p_syn.add_argument("--kind", choices=("sphere", "ellipsoid", "blobs"), required=True)
    p_syn.add_argument("--dims", type=_parse_dims, required=True, help="volume dims X,Y,Z")
    p_syn.add_argument("--out", required=True, help="image path (labels get a .labels tag)")
    p_syn.add_argument("--radius", type=float, default=10.0, help="sphere radius in voxels")
    p_syn.add_argument("--radii", type=_parse_floats, default=(8.0, 10.0, 12.0),
                       help="ellipsoid radii in voxels")
    p_syn.add_argument("--n-blobs", type=int, default=40, help="bump count for blobs")
    _common_flags(p_syn)

    return parser


def _read_scalar(path: str) -> np.ndarray:
    header, payload = vio.read_volume(path)
    if header.channels != 1:
        raise ValueError(f"{path}: expected a scalar volume, found {header.channels} channels")
    return payload


def _read_field(path: str) -> np.ndarray:
    header, payload = vio.read_volume(path)
    if header.channels != 3:
        raise ValueError(f"{path}: expected a 3-channel displacement field")
    return payload


def _cmd_register(args) -> int:
    moving = _minmax_normalise(_read_scalar(args.moving))
    fixed = _minmax_normalise(_read_scalar(args.fixed))
    cfg = CascadeConfig(
        alphas=args.alphas,
        optim=OptimConfig(sigma=args.sigma, lam=args.lam, step_size=args.step_size,
                          max_iters=args.iters),
        flow=FlowConfig(steps=args.steps),
        ncc=NccConfig(window=args.ncc_window),
        patch_size=args.patch,
        core_size=args.core,
    )
    log.info("registering %s -> %s, %d stage(s)", args.moving, args.fixed, cfg.n_stages)
    result = register(moving, fixed, cfg, threads=args.threads)
    for stage in result.stages:
        log.info("stage alpha=%g: ncc %0.4f -> %0.4f (%d patches, %d skipped, %.1fs)",
                 stage.alpha, stage.ncc_before, stage.ncc_after,
                 stage.n_patches, stage.n_skipped, stage.runtime_s)

    dims = moving.shape
    fieldhdr = vio.VolumeHeader(dims=dims, dtype="float32", channels=3)
    out_warp = _ensure_ext(args.out_warp, args.format)
    if args.forward_only:
        vio.write_volume(out_warp, fieldhdr, result.total.forward_disp)
    else:
        vio.write_volume(_with_tag(out_warp, "fwd"), fieldhdr, result.total.forward_disp)
        vio.write_volume(_with_tag(out_warp, "inv"), fieldhdr, result.total.inverse_disp)

    warped = warp_volume(moving, result.total.inverse_disp)
    if args.out_image:
        imghdr = vio.VolumeHeader(dims=dims, dtype="float32", channels=1)
        vio.write_volume(_ensure_ext(args.out_image, args.format), imghdr, warped)

    if args.metrics:
        jac = jacobian_report(result.total.forward_disp)
        payload = {
            "global_ncc": ncc_value(warped, fixed, cfg.ncc),
            **jac.as_dict(),
            "stages": [
                {
                    "alpha": s.alpha,
                    "ncc_before": s.ncc_before,
                    "ncc_after": s.ncc_after,
                    "n_patches": s.n_patches,
                    "n_skipped": s.n_skipped,
                    "runtime_s": s.runtime_s,
                }
                for s in result.stages
            ],
        }
        with open(args.metrics, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_warp(args) -> int:
    disp = _read_field(args.warp)
    if args.labels:
        header, labels = vio.read_volume(args.input, as_labels=True)
        out = warp_labels(labels, disp)
        outhdr = vio.VolumeHeader(dims=header.dims, spacing=header.spacing,
                                  dtype=header.dtype, channels=1, affine=header.affine)
    else:
        header, img = vio.read_volume(args.input)
        if header.channels != 1:
            raise ValueError(f"{args.input}: expected a scalar image")
        out = warp_volume(img, disp)
        outhdr = vio.VolumeHeader(dims=header.dims, spacing=header.spacing,
                                  dtype="float32", channels=1, affine=header.affine)
    vio.write_volume(_ensure_ext(args.out, args.format), outhdr, out)
    return 0


def _cmd_report(args) -> int:
    disp = _read_field(args.warp)
    det = jacobian_determinant(disp)
    jac = jacobian_report(disp)
    dice_rep = None
    if (args.fixed_labels is None) != (args.warped_labels is None):
        raise ValueError("--fixed-labels and --warped-labels must be given together")
    if args.fixed_labels:
        _, fixed_labels = vio.read_volume(args.fixed_labels, as_labels=True)
        _, warped_labels = vio.read_volume(args.warped_labels, as_labels=True)
        dice_rep = dice(warped_labels, fixed_labels)
    files = write_report(args.out, jacobian=jac, dice=dice_rep, det_volume=det,
                         plots=not args.no_plots)
    for f in files:
        log.info("wrote %s", f)
    return 0


def _cmd_synth(args) -> int:
    if args.kind == "sphere":
        image, labels = make_sphere(args.dims, radius=args.radius)
    elif args.kind == "ellipsoid":
        image, labels = make_ellipsoid(args.dims, radii=args.radii)
    else:
        image, labels = make_blobs(args.dims, seed=args.seed, n_blobs=args.n_blobs)
    out = _ensure_ext(args.out, args.format)
    vio.write_volume(out, vio.VolumeHeader(dims=args.dims, dtype="float32", channels=1), image)
    labhdr = vio.VolumeHeader(dims=args.dims, dtype="int16", channels=1)
    vio.write_volume(_with_tag(out, "labels"), labhdr, labels)
    return 0


_COMMANDS = {
    "register": _cmd_register,
    "warp": _cmd_warp,
    "report": _cmd_report,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return _COMMANDS[args.command](args)
    except (OSError, vio.FormatError) as exc:
        log.error("%s", exc)
        print(f"patchreg: {exc}", file=sys.stderr)
        return _EXIT_IO
    except ValueError as exc:
        print(f"patchreg: {exc}", file=sys.stderr)
        return _EXIT_ARGS
    except (RuntimeError, FloatingPointError, ArithmeticError) as exc:
        print(f"patchreg: numerical failure: {exc}", file=sys.stderr)
        return _EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
