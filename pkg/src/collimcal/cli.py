"""Command-line interface.

Exit codes: 0 success, 2 usage or schema error, 3 simulation sampling
failure, 4 degenerate configuration, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io
from .estimator import SphericalCalibrator
from .evaluation import estimate_pose, evaluate
from .exceptions import (
    CalibrationError,
    DegenerateConfiguration,
    NumericalError,
    SamplingExhausted,
    TooFewPoints,
)
from .experiments import SWEEP_FIELDS, sweep
from .geometry import CameraIntrinsics, PlanarTarget, RadialDistortion
from .simulate import SimConfig, generate
from .validation import sphere_motion_report

EXIT_OK, EXIT_USAGE, EXIT_SAMPLING, EXIT_DEGENERATE, EXIT_NUMERICAL = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


# -- config ------------------------------------------------------------------

_SCALAR_FIELDS = ("x", "y", "radius", "cone_half_angle_deg", "roll_range_deg", "margin_px")


def config_from_dict(doc: dict, base: SimConfig = SimConfig()) -> SimConfig:
    """Override simulator defaults from a JSON config document.

    Recognised keys: ``intrinsics``, ``distortion``, ``image_size``,
    ``target`` (``rows``, ``cols``, ``spacing_mm``) and the scalar fields
    ``x``, ``y``, ``radius``, ``cone_half_angle_deg``, ``roll_range_deg``,
    ``margin_px``.
    """
    known = {"intrinsics", "distortion", "image_size", "target", *_SCALAR_FIELDS}
    unknown = set(doc) - known
    if unknown:
        raise io.SchemaError(f"config: unknown keys {sorted(unknown)}")
    changes = {k: float(doc[k]) for k in _SCALAR_FIELDS if k in doc}
    try:
        if "intrinsics" in doc:
            changes["intrinsics"] = CameraIntrinsics(**{**base.intrinsics.to_dict(), **doc["intrinsics"]})
        if "distortion" in doc:
            changes["distortion"] = RadialDistortion(**{**base.distortion.to_dict(), **doc["distortion"]})
        if "image_size" in doc:
            w, h = doc["image_size"]
            changes["image_size"] = (int(w), int(h))
        if "target" in doc:
            t = doc["target"]
            changes["target"] = PlanarTarget(int(t.get("rows", base.target.rows)),
                                             int(t.get("cols", base.target.cols)),
                                             float(t.get("spacing_mm", base.target.spacing)))
    except (TypeError, ValueError) as err:
        raise io.SchemaError(f"config: {err}") from err
    return base.with_(**changes)


# -- commands ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.views < 1:
        raise UsageError("--views must be positive")
    if args.noise_px < 0 or args.sphere_noise_mm < 0:
        raise UsageError("noise levels must be non-negative")
    base = config_from_dict(io.read_json(args.config)) if args.config else SimConfig()
    config = base.with_(n_views=args.views, noise_px=args.noise_px,
                        sphere_noise_mm=args.sphere_noise_mm, seed=args.seed)
    obs, truth = generate(config)
    io.write_json(args.out, io.observations_to_dict(obs, truth))
    print(f"wrote {obs.n_views} views, {sum(len(v) for v in obs.views)} points to {args.out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    obs = io.load_observations(args.input)
    if args.solver == "minimal" and obs.n_views != 2:
        raise UsageError(f"--solver minimal needs exactly 2 views, input has {obs.n_views}")
    est = SphericalCalibrator(solver=args.solver, bundle_adjust=not args.no_ba,
                              max_iter=args.ba_max_iters, cauchy_scale=args.cauchy_scale_px,
                              freeze_skew=args.freeze_skew)
    est.fit(obs)
    report = {
        "solver": args.solver,
        "rms_calib_px": est.rms_,
        "per_view_rms": est.per_view_rms_,
        "ba": est.ba_report_.to_dict() if est.ba_report_ is not None else None,
    }
    doc = io.result_to_dict(est.intrinsics_, est.distortion_, est.extrinsics_, report)
    if args.out:
        io.write_json(args.out, doc)
    K = est.intrinsics_
    print(f"rms_calib_px {est.rms_:.6g}")
    print(f"fx {K.fx:.6f} fy {K.fy:.6f} cx {K.cx:.6f} cy {K.cy:.6f} skew {K.skew:.6g}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    obs = io.load_observations(args.eval)
    results = []
    for path in args.params:
        K, dist, _, _ = io.result_from_dict(io.read_json(path))
        results.append((path, evaluate(K, dist, obs, args.pose_points)))
    print(f"{'params':<40} {'rms_px':>12} {'median_view':>12} {'skipped':>8}")
    for path, res in results:
        print(f"{str(path):<40} {res.rms_px:>12.6f} {res.median_view_rms:>12.6f} "
              f"{len(res.skipped_views):>8d}")
    if len(results) == 2:
        diff = results[1][1].rms_px - results[0][1].rms_px
        print(f"{'difference (second - first)':<40} {diff:>12.6f}")
    if args.out:
        doc = {"pose_points": args.pose_points,
               "results": [{"params": str(p), **r.to_dict()} for p, r in results]}
        io.write_json(args.out, doc)
    return EXIT_OK


def _poses_for(args):
    """Poses for ``verify-sphere`` from whichever inputs were given."""
    if args.poses:
        return io.poses_from_dict(io.read_json(args.poses))
    if args.params:
        K, dist, ext, _ = io.result_from_dict(io.read_json(args.params))
        if not args.input:
            return [(R, ext.translation(i)) for i, R in enumerate(ext.rotations)]
        # free per-view poses measured with the calibrated camera
        obs = io.load_observations(args.input)
        return [estimate_pose(K, dist, obs.object_points(i), v.image_points)
                for i, v in enumerate(obs.views)]
    if args.input:
        doc = io.read_json(args.input)
        gt = doc.get("ground_truth")
        if gt is None:
            raise UsageError("--input alone needs a file with ground_truth; pass --params too")
        from .geometry import rotvec_to_matrix

        rots = [rotvec_to_matrix(r) for r in gt["rotations"]]
        centers = np.asarray(gt["view_centers_mm"], dtype=float)
        return [(R, -R @ c) for R, c in zip(rots, centers)]
    raise UsageError("one of --poses, --params or --input is required")


def cmd_verify_sphere(args) -> int:
    poses = _poses_for(args)
    try:
        report = sphere_motion_report(poses)
    except TooFewPoints as err:
        return _fail(f"insufficient poses: {err}", EXIT_USAGE)
    doc = report.to_dict()
    if args.out:
        io.write_json(args.out, doc)
    print(f"poses {report.n_poses}")
    print("centroid_mm " + " ".join(f"{v:.4f}" for v in report.centroid_mm))
    print("std_mm " + " ".join(f"{v:.4f}" for v in report.std_mm))
    print("std_percent_of_radius " + " ".join(f"{v:.4f}" for v in report.std_percent_of_radius))
    print(f"fitted_radius_mm {report.fitted_radius_mm:.6f} fit_rms_mm {report.fit_rms_mm:.3g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = config_from_dict(io.read_json(args.config)) if args.config else SimConfig()
    base = base.with_(n_views=args.views, noise_px=args.noise_px, sphere_noise_mm=args.sphere_noise_mm)
    jobs = -1 if args.parallel else 1
    rows = sweep(base, args.param, args.values, args.trials, args.stage, args.solver, jobs, args.seed)
    cols = ["param", "value", "trials", "failures", "median_focal_rel", "median_pp_px", "median_center_mm"]
    lines = [",".join(cols)] + [",".join(str(r[c]) for c in cols) for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="collimcal",
                                description="Camera calibration from planar views under spherical motion.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a synthetic observation file")
    s.add_argument("--out", required=True)
    s.add_argument("--views", type=int, default=15)
    s.add_argument("--noise-px", type=float, default=0.0)
    s.add_argument("--sphere-noise-mm", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config", help="JSON file overriding camera and target defaults")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", help="estimate intrinsics and the rotation centre")
    c.add_argument("--input", required=True)
    c.add_argument("--solver", choices=["closedform", "minimal"], default="closedform")
    c.add_argument("--no-ba", action="store_true", help="skip bundle adjustment")
    c.add_argument("--ba-max-iters", type=int, default=100)
    c.add_argument("--cauchy-scale-px", type=float, default=2.0)
    c.add_argument("--freeze-skew", action="store_true")
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)

    e = sub.add_parser("evaluate", help="reprojection error on held-out views")
    e.add_argument("--params", required=True, action="append",
                   help="result file; give twice to compare two calibrations")
    e.add_argument("--eval", required=True)
    e.add_argument("--pose-points", choices=["quarter", "all"], default="quarter")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    v = sub.add_parser("verify-sphere", help="check how spherical a set of poses is")
    v.add_argument("--params", help="result file")
    v.add_argument("--poses", help="pose file")
    v.add_argument("--input", help="observation file; with --params, poses are re-estimated per view")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify_sphere)

    w = sub.add_parser("sweep", help="median errors over seeded trials, as CSV")
    w.add_argument("--param", choices=sorted(SWEEP_FIELDS), required=True)
    w.add_argument("--values", type=float, nargs="+", required=True)
    w.add_argument("--trials", type=int, default=200)
    w.add_argument("--parallel", action="store_true", help="run trials on all cores")
    w.add_argument("--stage", choices=["init", "ba"], default="ba")
    w.add_argument("--solver", choices=["closedform", "minimal"], default="closedform")
    w.add_argument("--views", type=int, default=15)
    w.add_argument("--noise-px", type=float, default=0.5)
    w.add_argument("--sphere-noise-mm", type=float, default=0.0)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--config")
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, io.SchemaError, FileNotFoundError, TooFewPoints) as err:
        return _fail(str(err), EXIT_USAGE)
    except SamplingExhausted as err:
        return _fail(f"sampling failed: {err}", EXIT_SAMPLING)
    except DegenerateConfiguration as err:
        return _fail(f"degenerate configuration: {err}", EXIT_DEGENERATE)
    except (NumericalError, CalibrationError, np.linalg.LinAlgError) as err:
        where = ""
        if getattr(err, "view", None) is not None:
            where = f" (view {err.view}, point {err.point})"
        return _fail(f"numerical failure: {err}{where}", EXIT_NUMERICAL)
    except ValueError as err:
        return _fail(str(err), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
