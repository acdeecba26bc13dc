"""Command-line pipeline: one subcommand per registration/fusion stage.

Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 numerical
failure.  Errors print one machine-readable line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .coarse import CoarseParams, coarse_register
from .core import AffineTransform3, PointCloud, apply_transform
from .cpd import CpdParams, cpd_affine, cpd_rigid
from .errors import (
    CardiofuseError,
    DegenerateConfiguration,
    EmptyInput,
    InvalidData,
    InvalidParameter,
    NumericalCollapse,
    ParseError,
    SingularTransform,
)
from .fusion import FusionInput, dice, map_mpi_to_mesh, mean_distance_error
from .icp import IcpParams, icp, sicp
from .phantom import (
    PerturbSpec,
    ShellDescriptor,
    ShellParams,
    generate_lv_shell,
    generate_phantom_volume,
    perturb_cloud,
)
from .segmentation import extract_isosurface, mask_to_point_cloud, region_grow
from .volume import build_spatial_reference, warp_volume

_NUMERICAL_ERRORS = (DegenerateConfiguration, NumericalCollapse, SingularTransform)
_DATA_ERRORS = (ParseError, InvalidData, InvalidParameter, EmptyInput, FileNotFoundError)

METHODS = ("icp", "sicp", "cpd-rigid", "cpd-affine")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise UsageError(message)


def _g(x: float) -> str:
    return f"{x:.9g}"


def _run_method(method, moving, fixed, init, max_iterations=None):
    if method == "icp":
        params = IcpParams() if max_iterations is None else IcpParams(max_iterations=max_iterations)
        return icp(moving, fixed, init, params)
    if method == "sicp":
        params = IcpParams() if max_iterations is None else IcpParams(max_iterations=max_iterations)
        return sicp(moving, fixed, init, params)
    params = CpdParams() if max_iterations is None else CpdParams(max_iterations=max_iterations)
    if method == "cpd-rigid":
        return cpd_rigid(moving, fixed, init, params)
    if method == "cpd-affine":
        return cpd_affine(moving, fixed, init, params)
    raise UsageError(f"unknown method {method!r}")


def _resolve_init(args) -> AffineTransform3 | None:
    """Explicit --init wins; otherwise landmark files trigger a coarse pass."""
    if getattr(args, "init", None):
        return fileio.read_transform(args.init)
    if getattr(args, "moving_landmarks", None) and getattr(args, "fixed_landmarks", None):
        mov_lm = fileio.read_landmarks(args.moving_landmarks)
        fix_lm = fileio.read_landmarks(args.fixed_landmarks)
        return coarse_register(mov_lm, fix_lm, CoarseParams())
    print(
        "warning: no --init and no landmark files; fine registration starts "
        "from identity and may lock onto a wrong orientation",
        file=sys.stderr,
    )
    return None


def _report(result, method: str, out=None):
    out = out if out is not None else sys.stdout
    print(f"method {method}", file=out)
    print(f"iterations {result.iterations}", file=out)
    print(f"converged {str(result.converged).lower()}", file=out)
    print(f"mde_mm {_g(result.mde)}", file=out)
    trace = " ".join(_g(v) for v in result.objective_trace)
    print(f"objective_trace {trace}", file=out)


def _cmd_region_grow(args):
    vol = fileio.read_volume(args.volume)
    seeds = [tuple(s) for s in args.seed]
    mask = region_grow(vol, seeds, args.threshold)
    fileio.write_mask(args.out, mask)


def _cmd_surface(args):
    mask = fileio.read_mask(args.mask)
    fileio.write_mesh(args.out, extract_isosurface(mask))


def _cmd_cloud(args):
    mask = fileio.read_mask(args.mask)
    fileio.write_point_cloud(args.out, mask_to_point_cloud(mask))


def _cmd_coarse(args):
    moving = fileio.read_landmarks(args.moving)
    fixed = fileio.read_landmarks(args.fixed)
    params = CoarseParams(with_scaling=not args.no_scaling, target_count=args.count)
    fileio.write_transform(args.out, coarse_register(moving, fixed, params))


def _cmd_register(args):
    moving = fileio.read_point_cloud(args.moving)
    fixed = fileio.read_point_cloud(args.fixed)
    init = _resolve_init(args)
    result = _run_method(args.method, moving, fixed, init, args.max_iterations)
    fileio.write_transform(args.out, result.transform)
    _report(result, args.method)
    if args.report:
        with open(args.report, "w") as f:
            _report(result, args.method, out=f)


def _cmd_warp(args):
    vol = fileio.read_volume(args.volume)
    t = fileio.read_transform(args.transform)
    if args.like:
        out_ref = fileio.read_volume(args.like).ref
    elif args.size and args.voxel and args.origin:
        out_ref = build_spatial_reference(args.size, args.voxel, args.origin)
    else:
        raise UsageError("warp needs --like or all of --size/--voxel/--origin")
    fileio.write_volume(args.out, warp_volume(vol, t, out_ref, fill=args.fill))


def _cmd_fuse(args):
    mesh = fileio.read_mesh(args.mesh)
    if args.cloud:
        fused = map_mpi_to_mesh(FusionInput(mesh, cloud=fileio.read_point_cloud(args.cloud)))
    elif args.volume and args.transform:
        fused = map_mpi_to_mesh(
            FusionInput(
                mesh,
                volume=fileio.read_volume(args.volume),
                transform=fileio.read_transform(args.transform),
            )
        )
    else:
        raise UsageError("fuse needs --cloud, or --volume with --transform")
    fileio.write_mesh(args.out, fused)


def _cmd_metrics(args):
    if args.dice:
        a = fileio.read_mask(args.dice[0])
        b = fileio.read_mask(args.dice[1])
        print(_g(dice(a, b)))
    elif args.mde:
        a = fileio.read_point_cloud(args.mde[0])
        b = fileio.read_point_cloud(args.mde[1])
        print(_g(mean_distance_error(a, b)))
    else:
        raise UsageError("metrics needs --dice or --mde")


def _cmd_phantom_shell(args):
    params = ShellParams(
        semi_axes=tuple(args.semi_axes),
        truncation_fraction=args.truncation,
        point_count=args.points,
        rng_seed=args.seed,
    )
    cloud, landmarks = generate_lv_shell(params)
    if args.transform or args.noise > 0 or args.outliers > 0:
        t = (
            fileio.read_transform(args.transform)
            if args.transform
            else AffineTransform3.identity()
        )
        spec = PerturbSpec(
            transform=t,
            noise_sigma=args.noise,
            outlier_fraction=args.outliers,
            rng_seed=args.perturb_seed,
        )
        cloud, landmarks = perturb_cloud(cloud, landmarks, spec)
    fileio.write_point_cloud(args.out_cloud, cloud)
    if args.out_landmarks:
        fileio.write_landmarks(args.out_landmarks, landmarks)


def _cmd_phantom_volume(args):
    ref = build_spatial_reference(args.size, args.voxel, args.origin)
    shells = []
    for spec in args.shell:
        if len(spec) != 7:
            raise UsageError("--shell needs cx cy cz ax ay az intensity")
        shells.append(
            ShellDescriptor(
                center=tuple(spec[:3]), semi_axes=tuple(spec[3:6]), intensity=spec[6]
            )
        )
    fileio.write_volume(args.out, generate_phantom_volume(ref, shells))


def _cmd_compare(args):
    moving = fileio.read_point_cloud(args.moving)
    fixed = fileio.read_point_cloud(args.fixed)
    init = _resolve_init(args)
    with open(args.out, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["method", "mde_mm", "iterations", "converged"])
        for method in METHODS:
            result = _run_method(method, moving, fixed, init, args.max_iterations)
            writer.writerow(
                [method, _g(result.mde), result.iterations, str(result.converged).lower()]
            )


def build_parser() -> _Parser:
    parser = _Parser(prog="cardiofuse")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("region-grow", help="segment a volume by seeded region growing")
    p.add_argument("--volume", required=True)
    p.add_argument("--seed", type=int, nargs=3, action="append", required=True,
                   metavar=("I", "J", "K"))
    p.add_argument("--threshold", type=float, default=400.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_region_grow)

    p = sub.add_parser("surface", help="mask to STL isosurface mesh")
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_surface)

    p = sub.add_parser("cloud", help="mask to PLY boundary point cloud")
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cloud)

    p = sub.add_parser("coarse", help="landmark coarse registration")
    p.add_argument("--moving", required=True)
    p.add_argument("--fixed", required=True)
    p.add_argument("--no-scaling", action="store_true")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_coarse)

    p = sub.add_parser("register", help="fine point-cloud registration")
    p.add_argument("--moving", required=True)
    p.add_argument("--fixed", required=True)
    p.add_argument("--moving-landmarks")
    p.add_argument("--fixed-landmarks")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--init")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=_cmd_register)

    p = sub.add_parser("warp", help="resample a volume through a transform")
    p.add_argument("--volume", required=True)
    p.add_argument("--transform", required=True)
    p.add_argument("--like", help="volume file providing the output reference")
    p.add_argument("--size", type=int, nargs=3)
    p.add_argument("--voxel", type=float, nargs=3)
    p.add_argument("--origin", type=float, nargs=3)
    p.add_argument("--fill", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_warp)

    p = sub.add_parser("fuse", help="map perfusion values onto a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--cloud")
    p.add_argument("--volume")
    p.add_argument("--transform")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("metrics", help="dice of two masks or mde of two clouds")
    p.add_argument("--dice", nargs=2, metavar=("A", "B"))
    p.add_argument("--mde", nargs=2, metavar=("A", "B"))
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("phantom", help="synthetic ground-truth generators")
    psub = p.add_subparsers(dest="phantom_command", required=True)

    ps = psub.add_parser("shell", help="truncated-ellipsoid shell with landmarks")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--points", type=int, default=2000)
    ps.add_argument("--semi-axes", type=float, nargs=3, default=[30.0, 22.0, 50.0])
    ps.add_argument("--truncation", type=float, default=0.85)
    ps.add_argument("--transform", help="perturb with this ground-truth transform")
    ps.add_argument("--noise", type=float, default=0.0)
    ps.add_argument("--outliers", type=float, default=0.0)
    ps.add_argument("--perturb-seed", type=int, default=0)
    ps.add_argument("--out-cloud", required=True)
    ps.add_argument("--out-landmarks")
    ps.set_defaults(func=_cmd_phantom_shell)

    pv = psub.add_parser("volume", help="nested-ellipsoid intensity volume")
    pv.add_argument("--size", type=int, nargs=3, required=True)
    pv.add_argument("--voxel", type=float, nargs=3, required=True)
    pv.add_argument("--origin", type=float, nargs=3, required=True)
    pv.add_argument("--shell", type=float, nargs=7, action="append", default=[],
                    metavar=("CX", "CY", "CZ", "AX", "AY", "AZ", "I"))
    pv.add_argument("--out", required=True)
    pv.set_defaults(func=_cmd_phantom_volume)

    p = sub.add_parser("compare", help="run all four methods, emit a CSV table")
    p.add_argument("--moving", required=True)
    p.add_argument("--fixed", required=True)
    p.add_argument("--moving-landmarks")
    p.add_argument("--fixed-landmarks")
    p.add_argument("--init")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except UsageError as exc:
        print(f"error: UsageError: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except _DATA_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except CardiofuseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
