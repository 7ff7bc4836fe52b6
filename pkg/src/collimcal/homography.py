"""Plane-to-image homographies: normalised DLT and decomposition with known K."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateConfiguration, SingularHomography, SingularIntrinsics
from .geometry import CameraIntrinsics, project_to_so3

DLT_RANK_TOL = 1e-10


def normalize_gauge(H) -> np.ndarray:
    """Scale ``H`` to unit Frobenius norm with a positive (3, 3) entry."""
    H = np.asarray(H, dtype=float)
    H = H / np.linalg.norm(H)
    return -H if H[2, 2] < 0 else H


@dataclass(frozen=True)
class Homography:
    """3x3 projective map stored in the fixed gauge (unit norm, ``H[2,2] > 0``).

    ``scale`` optionally records a ratio relative to a base view.
    """

    matrix: np.ndarray
    scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "matrix", normalize_gauge(self.matrix))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def inverse(self) -> np.ndarray:
        if abs(self.det) < 1e-14:
            raise SingularHomography(f"det(H) = {self.det:.3g}")
        return np.linalg.inv(self.matrix)

    def apply(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        q = np.column_stack([pts, np.ones(len(pts))]) @ self.matrix.T
        return q[:, :2] / q[:, 2:3]


def _isotropic_normalization(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    d = np.mean(np.linalg.norm(pts - c, axis=1))
    if d == 0:
        raise DegenerateConfiguration("all points coincide")
    s = np.sqrt(2) / d
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def estimate_homography(src, dst) -> Homography:
    """Least-squares DLT homography mapping ``src`` onto ``dst``.

    Both point sets are shifted to their centroid and scaled to a mean
    distance of sqrt(2) before the SVD; the conditioning transforms are undone
    on the result.

    Parameters
    ----------
    src : (n, 2) array_like
        Target-plane points (mm).
    dst : (n, 2) array_like
        Matching image points (px).

    Raises
    ------
    DegenerateConfiguration
        Fewer than 4 points, or a design matrix of rank < 8.
    """
    src = np.asarray(src, dtype=float)[:, :2]
    dst = np.asarray(dst, dtype=float)[:, :2]
    n = len(src)
    if n < 4 or len(dst) != n:
        raise DegenerateConfiguration(f"need at least 4 matched points, got {n}")
    Ts, Td = _isotropic_normalization(src), _isotropic_normalization(dst)
    s = src @ Ts[:2, :2].T + Ts[:2, 2]
    d = dst @ Td[:2, :2].T + Td[:2, 2]

    A = np.zeros((2 * n, 9))
    ones = np.ones(n)
    sh = np.column_stack([s, ones])
    A[0::2, 0:3] = sh
    A[0::2, 6:9] = -d[:, :1] * sh
    A[1::2, 3:6] = sh
    A[1::2, 6:9] = -d[:, 1:2] * sh

    _, sv, Vt = np.linalg.svd(A)
    if sv[min(7, len(sv) - 1)] < DLT_RANK_TOL * sv[0] or len(sv) < 8:
        raise DegenerateConfiguration("DLT design matrix has rank < 8 (collinear points?)")
    Hn = Vt[-1].reshape(3, 3)
    return Homography(np.linalg.inv(Td) @ Hn @ Ts)


def rotation_from_homography(H, K: CameraIntrinsics):
    """Rotation and scale ``lambda`` from ``H = lambda K [r1 r2 t]``.

    The columns ``K^-1 h1`` and ``K^-1 h2`` are divided by the mean of their
    norms, completed with their cross product and projected onto SO(3). The
    sign of ``H`` is fixed so the target lies in front of the camera, hence
    ``lam`` is returned for the sign-corrected matrix and is always positive.

    Returns
    -------
    R : (3, 3) ndarray
    lam : float
    """
    Hm = H.matrix if isinstance(H, Homography) else np.asarray(H, dtype=float)
    Km = K.K if isinstance(K, CameraIntrinsics) else np.asarray(K, dtype=float)
    if abs(np.linalg.det(Km)) < 1e-300:
        raise SingularIntrinsics("K is not invertible")
    M = np.linalg.solve(Km, Hm)
    if M[2, 2] < 0:
        M = -M
    lam = (np.linalg.norm(M[:, 0]) + np.linalg.norm(M[:, 1])) / 2.0
    r1, r2 = M[:, 0] / lam, M[:, 1] / lam
    R = project_to_so3(np.column_stack([r1, r2, np.cross(r1, r2)]))
    return R, lam


def pose_from_homography(H, K: CameraIntrinsics):
    """Free 6-DOF pose ``(R, t)`` with ``X = R P + t`` from a plane homography.

    The sign of ``lambda`` is chosen so the target lies in front of the camera.
    """
    Hm = H.matrix if isinstance(H, Homography) else np.asarray(H, dtype=float)
    R, lam = rotation_from_homography(Hm, K)
    t = np.linalg.solve(K.K, Hm[:, 2]) / lam
    # H is only defined up to sign; the plane must be in front
    return R, (t if t[2] > 0 else -t)
