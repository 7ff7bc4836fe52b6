"""Diagnostics: sphere-fit verification of the motion model and degeneracy checks."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .closed_form import RANK_TOL, build_linear_system, numerical_rank
from .exceptions import ConditionWarning, TooFewPoints


def fit_sphere(points):
    """Fit a sphere to 3-D points.

    An algebraic fit of ``|p|^2 = 2 c.p + (r^2 - |c|^2)`` on centred data
    seeds one Gauss-Newton pass on the geometric distances.

    Returns
    -------
    center : (3,) ndarray
    radius : float
    rms : float
        Root mean square of ``|p - center| - radius``.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(P) < 4:
        raise TooFewPoints(f"sphere fit needs at least 4 points, got {len(P)}")
    mu = P.mean(axis=0)
    Q = P - mu
    A = np.column_stack([2.0 * Q, np.ones(len(Q))])
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        warnings.warn("points are (nearly) coplanar; sphere fit is ill-conditioned",
                      ConditionWarning, stacklevel=2)
    sol, *_ = np.linalg.lstsq(A, np.sum(Q**2, axis=1), rcond=None)
    c = sol[:3]
    r = np.sqrt(max(sol[3] + c @ c, 0.0))

    diff = Q - c
    dist = np.linalg.norm(diff, axis=1)
    if np.all(dist > 0):
        J = np.column_stack([-diff / dist[:, None], -np.ones(len(Q))])
        step, *_ = np.linalg.lstsq(J, -(dist - r), rcond=None)
        c, r = c + step[:3], r + step[3]
        dist = np.linalg.norm(Q - c, axis=1)
    rms = float(np.sqrt(np.mean((dist - r) ** 2)))
    return c + mu, float(r), rms


@dataclass
class SphereFitReport:
    n_poses: int
    centroid_mm: list
    mean_radius_mm: float
    std_mm: list
    std_percent_of_radius: list
    range_mm: list
    mean_distance_error_mm: float
    fitted_center_mm: list
    fitted_radius_mm: float
    fit_rms_mm: float
    axis_intersection_centroid_mm: list
    axis_intersection_std_mm: list

    def to_dict(self) -> dict:
        return asdict(self)


def sphere_motion_report(poses) -> SphereFitReport:
    """Summarise how closely a set of target poses follows spherical motion.

    Parameters
    ----------
    poses : sequence of (R, t)
        Target-to-camera poses, ``X = R P + t``.

    Notes
    -----
    Camera centres ``-R^T t`` are expressed in the target frame and described
    by centroid, standard deviation and range. The target anchor
    ``(x_mean, y_mean, 0)`` is then mapped into each camera frame: for exact
    spherical motion these points lie on a sphere around the optical centre,
    and each target's z-axis through the anchor meets the camera ``Z = 0``
    plane at the optical centre.
    """
    poses = [(np.asarray(R, dtype=float), np.asarray(t, dtype=float)) for R, t in poses]
    if len(poses) < 3:
        raise TooFewPoints(f"need at least 3 poses, got {len(poses)}")
    centers = np.array([-R.T @ t for R, t in poses])
    centroid = centers.mean(axis=0)
    std = centers.std(axis=0, ddof=1)

    anchor = np.array([centroid[0], centroid[1], 0.0])
    X = np.array([R @ anchor + t for R, t in poses])
    radii = np.linalg.norm(X, axis=1)
    mean_radius = float(radii.mean())

    if len(poses) >= 4:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConditionWarning)
            fc, fr, frms = fit_sphere(X)
    else:
        fc, fr, frms = np.full(3, np.nan), float("nan"), float("nan")

    hits = []
    for (R, _), x in zip(poses, X):
        axis = R[:, 2]
        s = -x[2] / axis[2]
        hits.append((x + s * axis)[:2])
    hits = np.array(hits)

    return SphereFitReport(
        n_poses=len(poses),
        centroid_mm=centroid.tolist(),
        mean_radius_mm=mean_radius,
        std_mm=std.tolist(),
        std_percent_of_radius=(100.0 * std / mean_radius).tolist(),
        range_mm=(centers.max(axis=0) - centers.min(axis=0)).tolist(),
        mean_distance_error_mm=float(np.mean(np.abs(radii - mean_radius))),
        fitted_center_mm=np.asarray(fc).tolist(),
        fitted_radius_mm=float(fr),
        fit_rms_mm=float(frms),
        axis_intersection_centroid_mm=hits.mean(axis=0).tolist(),
        axis_intersection_std_mm=hits.std(axis=0, ddof=1).tolist(),
    )


class DegeneracyScore(NamedTuple):
    rank: int
    smallest_singular_value: float
    verdict: str


def degeneracy_score(homographies, base_index: int = 0, tol: float = RANK_TOL) -> DegeneracyScore:
    """Numerical rank of the closed-form system built from ``homographies``.

    ``verdict`` is ``"degenerate"`` when three or more views leave the rank
    below 11, ``"minimal"`` for two views and ``"ok"`` otherwise. The smallest
    singular value reported is the smallest one counted in the rank, relative
    to the largest.
    """
    if len(homographies) < 2:
        raise TooFewPoints("degeneracy check needs at least 2 homographies")
    system = build_linear_system(homographies, base_index, min_views=2)
    rank, s = numerical_rank(system.D, tol)
    smallest = float(s[rank - 1]) if rank else 0.0
    if len(homographies) == 2:
        verdict = "minimal"
    else:
        verdict = "degenerate" if rank < 11 else "ok"
    return DegeneracyScore(rank, smallest, verdict)


def row_space_residual(D_prior, D_new) -> float:
    """Largest relative distance of a row of ``D_new`` from the row space of ``D_prior``.

    Columns are equilibrated jointly first. A value near zero means the new
    rows add no constraints.
    """
    D_prior, D_new = np.asarray(D_prior, dtype=float), np.asarray(D_new, dtype=float)
    norms = np.linalg.norm(np.vstack([D_prior, D_new]), axis=0)
    norms[norms == 0] = 1.0
    P, Nw = D_prior / norms, D_new / norms
    _, s, Vt = np.linalg.svd(P, full_matrices=False)
    basis = Vt[s >= RANK_TOL * s[0]]
    proj = Nw @ basis.T @ basis
    return float(np.max(np.linalg.norm(Nw - proj, axis=1) / np.linalg.norm(Nw, axis=1)))
