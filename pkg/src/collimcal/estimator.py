"""Scikit-learn style front end for the calibration pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._checks import check_observations
from .bundle import BAOptions, bundle_adjust, pack, residuals, rms
from .closed_form import solve_closed_form
from .evaluation import estimate_pose, evaluate, split_points
from .geometry import RadialDistortion, project_with_pose
from .minimal import solve_minimal


class SphericalCalibrator(BaseEstimator):
    """Calibrate a camera from planar views taken under spherical motion.

    Parameters
    ----------
    solver : {"closedform", "minimal"}
        Initial solver. ``minimal`` needs exactly two views, ``closedform``
        at least three.
    bundle_adjust : bool
        Refine the initial solution (and estimate distortion) by bundle
        adjustment.
    max_iter : int
        Bundle adjustment iteration cap.
    cauchy_scale : float
        Scale of the Cauchy loss in pixels.
    freeze_skew : bool
        Keep the skew from the initial solver during bundle adjustment.
    minimal_rows : {6, 10}
        Constraint rows used by the minimal solver.
    condition : bool
        Normalise pixel coordinates inside the linear solvers.
    base_view : int or None
        Base view of the closed-form solver; defaults to the view with most
        points.

    Attributes
    ----------
    intrinsics_, distortion_, extrinsics_
        Final estimates.
    initial_intrinsics_, initial_extrinsics_
        Solver output before bundle adjustment.
    ba_report_ : BAReport or None
    rms_ : float
        Reprojection RMS over all residual components, pixels.
    per_view_rms_ : list of float
    """

    def __init__(self, solver="closedform", bundle_adjust=True, max_iter=100, cauchy_scale=2.0,
                 freeze_skew=False, minimal_rows=6, condition=True, base_view=None):
        self.solver = solver
        self.bundle_adjust = bundle_adjust
        self.max_iter = max_iter
        self.cauchy_scale = cauchy_scale
        self.freeze_skew = freeze_skew
        self.minimal_rows = minimal_rows
        self.condition = condition
        self.base_view = base_view

    def fit(self, X, y=None):
        obs = check_observations(X)
        if self.solver == "closedform":
            K, ext = solve_closed_form(obs, self.base_view, condition=self.condition)
        elif self.solver == "minimal":
            K, ext = solve_minimal(obs, rows=self.minimal_rows, condition=self.condition)
        else:
            raise ValueError(f"unknown solver {self.solver!r}")
        self.initial_intrinsics_, self.initial_extrinsics_ = K, ext
        dist = RadialDistortion()
        self.ba_report_ = None
        if self.bundle_adjust:
            opts = BAOptions(cauchy_scale=self.cauchy_scale, max_iter=self.max_iter,
                             freeze_skew=self.freeze_skew)
            K, dist, ext, self.ba_report_ = bundle_adjust(K, dist, ext, obs, opts)
        self.intrinsics_, self.distortion_, self.extrinsics_ = K, dist, ext
        self.n_views_ = obs.n_views

        res = residuals(pack(K, dist, ext), obs).reshape(-1, 2)
        bounds = np.cumsum([0] + [len(v) for v in obs.views])
        self.per_view_rms_ = [rms(res[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
        self.rms_ = rms(res)
        return self

    def predict(self, X, pose_points="quarter"):
        """Reproject every target point of held-out views.

        Each view's pose is estimated from its pose subset (see
        :func:`collimcal.evaluation.split_points`) with the fitted camera.

        Returns
        -------
        list of (n_i, 2) ndarray
        """
        check_is_fitted(self, "intrinsics_")
        obs = check_observations(X)
        out = []
        for i, view in enumerate(obs.views):
            pose_idx, _ = split_points(len(view), pose_points)
            P = obs.object_points(i)
            R, t = estimate_pose(self.intrinsics_, self.distortion_, P[pose_idx],
                                 view.image_points[pose_idx])
            out.append(project_with_pose(self.intrinsics_, self.distortion_, R, t, P))
        return out

    def evaluate(self, X, pose_points="quarter"):
        check_is_fitted(self, "intrinsics_")
        return evaluate(self.intrinsics_, self.distortion_, check_observations(X), pose_points)

    def score(self, X, y=None):
        """Negative held-out reprojection RMS (higher is better)."""
        return -self.evaluate(X).rms_px
