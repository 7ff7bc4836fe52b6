"""Held-out evaluation: estimate each view's pose from a subset of its points
and measure the reprojection error of the remaining ones."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .bundle import rms
from .exceptions import DegenerateConfiguration
from .geometry import (
    CameraIntrinsics,
    PlanarObservations,
    RadialDistortion,
    matrix_to_rotvec,
    normalized_from_pixels,
    project_with_pose,
    rotvec_to_matrix,
    undistort,
)
from .homography import estimate_homography, pose_from_homography

_IDENTITY = CameraIntrinsics(1.0, 1.0, 0.0, 0.0, 0.0)


def split_points(n: int, mode: str = "quarter"):
    """Indices ``(pose_idx, eval_idx)`` for a view with ``n`` correspondences.

    ``quarter`` takes every fourth correspondence for the pose and evaluates
    on the rest; ``all`` uses every point for both.
    """
    idx = np.arange(n)
    if mode == "all":
        return idx, idx
    if mode != "quarter":
        raise ValueError(f"unknown pose-point mode {mode!r}")
    pose = idx % 4 == 0
    return idx[pose], idx[~pose]


def estimate_pose(K: CameraIntrinsics, dist: RadialDistortion, object_points, image_points,
                  refine: bool = True):
    """Free pose ``(R, t)`` of a planar target with known intrinsics.

    Image points are undistorted into normalised coordinates, a homography
    to the plane is decomposed into ``[r1 r2 t]`` and orthogonalised. With
    ``refine`` the six pose parameters are then polished by minimising the
    pixel reprojection error.
    """
    P = np.asarray(object_points, dtype=float)
    p = np.asarray(image_points, dtype=float)
    xn = undistort(normalized_from_pixels(p, K), dist)
    H = estimate_homography(P[:, :2], xn)
    R, t = pose_from_homography(H, _IDENTITY)
    if not refine:
        return R, t

    def fun(q):
        return (project_with_pose(K, dist, rotvec_to_matrix(q[:3]), q[3:], P) - p).ravel()

    sol = least_squares(fun, np.concatenate([matrix_to_rotvec(R), t]), method="lm",
                        xtol=1e-14, ftol=1e-14)
    return rotvec_to_matrix(sol.x[:3]), sol.x[3:]


@dataclass
class EvaluationResult:
    per_view_rms: list = field(default_factory=list)
    rms_px: float = 0.0
    median_view_rms: float = 0.0
    skipped_views: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_view_rms": list(self.per_view_rms),
            "rms_px": self.rms_px,
            "median_view_rms": self.median_view_rms,
            "skipped_views": list(self.skipped_views),
        }


def evaluate(K: CameraIntrinsics, dist: RadialDistortion, obs: PlanarObservations,
             pose_points: str = "quarter", refine: bool = True) -> EvaluationResult:
    """Reprojection error on held-out views.

    Views whose pose subset is degenerate (fewer than 4 usable points) are
    listed in ``skipped_views``.
    """
    per_view, all_res, skipped = [], [], []
    for i, view in enumerate(obs.views):
        pose_idx, eval_idx = split_points(len(view), pose_points)
        P = obs.object_points(i)
        try:
            R, t = estimate_pose(K, dist, P[pose_idx], view.image_points[pose_idx], refine)
        except DegenerateConfiguration:
            skipped.append(i)
            continue
        res = (project_with_pose(K, dist, R, t, P[eval_idx]) - view.image_points[eval_idx]).ravel()
        per_view.append(rms(res))
        all_res.append(res)
    total = rms(np.concatenate(all_res)) if all_res else float("nan")
    median = float(np.median(per_view)) if per_view else float("nan")
    return EvaluationResult(per_view, total, median, skipped)
