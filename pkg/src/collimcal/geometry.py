"""Camera model, planar target and observation containers.

Poses follow the spherical-motion convention used throughout the package: a
target point ``P`` (target frame, millimetres, ``Z = 0``) maps into the camera
frame as ``X = R @ (P - t_cp)`` where ``t_cp = (x, y, -r)`` is the camera
centre expressed in the target frame and is shared by every view.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .exceptions import NonPositiveDepth, SingularIntrinsics


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics ``fx, fy, cx, cy`` (pixels) and skew ``skew``."""

    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, self.skew, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @classmethod
    def from_matrix(cls, K) -> "CameraIntrinsics":
        """Build from an upper-triangular matrix, normalising ``K[2, 2]`` to 1."""
        K = np.asarray(K, dtype=float)
        if abs(K[2, 2]) < 1e-300:
            raise SingularIntrinsics("K[2, 2] is zero")
        K = K / K[2, 2]
        return cls(fx=K[0, 0], fy=K[1, 1], cx=K[0, 2], cy=K[1, 2], skew=K[0, 1])

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.cx, self.cy, self.skew])

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy, "skew": self.skew}


@dataclass(frozen=True)
class RadialDistortion:
    """Two-term radial polynomial applied in normalised image coordinates."""

    k1: float = 0.0
    k2: float = 0.0

    def to_dict(self) -> dict:
        return {"k1": self.k1, "k2": self.k2}


@dataclass(frozen=True)
class SphericalExtrinsics:
    """Fixed camera centre ``(x, y, -radius)`` plus one rotation per view."""

    x: float
    y: float
    radius: float
    rotations: tuple = ()

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(
            self, "rotations", tuple(np.asarray(R, dtype=float) for R in self.rotations)
        )

    @property
    def t_cp(self) -> np.ndarray:
        return np.array([self.x, self.y, -self.radius])

    @property
    def n_views(self) -> int:
        return len(self.rotations)

    def translation(self, i: int) -> np.ndarray:
        """Camera-frame translation ``-R_i t_cp`` of view ``i``."""
        return -self.rotations[i] @ self.t_cp


@dataclass(frozen=True)
class PlanarTarget:
    """Regular grid of ``rows x cols`` points spaced ``spacing`` mm apart.

    Point ``index = row * cols + col`` sits at ``(col * spacing, row * spacing, 0)``.
    """

    rows: int = 8
    cols: int = 11
    spacing: float = 30.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or not self.spacing > 0:
            raise ValueError("target needs positive rows, cols and spacing")

    @property
    def n_points(self) -> int:
        return self.rows * self.cols

    @property
    def points(self) -> np.ndarray:
        r, c = np.divmod(np.arange(self.n_points), self.cols)
        return np.column_stack([c * self.spacing, r * self.spacing, np.zeros(self.n_points)])

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.cols - 1) * self.spacing / 2, (self.rows - 1) * self.spacing / 2])


@dataclass
class View:
    """Correspondences of a single image: target indices and pixel positions."""

    indices: np.ndarray
    image_points: np.ndarray
    view_id: int | str | None = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=int).reshape(-1)
        self.image_points = np.asarray(self.image_points, dtype=float).reshape(-1, 2)
        if len(self.indices) != len(self.image_points):
            raise ValueError("indices and image_points differ in length")

    def __len__(self):
        return len(self.indices)


@dataclass
class PlanarObservations:
    """Per-view correspondences against a shared planar target."""

    target: PlanarTarget
    views: list = field(default_factory=list)
    image_size: tuple = (1080, 960)

    @property
    def n_views(self) -> int:
        return len(self.views)

    def subset(self, view_indices: Sequence[int]) -> "PlanarObservations":
        return PlanarObservations(
            self.target, [self.views[i] for i in view_indices], self.image_size
        )

    def object_points(self, i: int) -> np.ndarray:
        return self.target.points[self.views[i].indices]

    def stacked(self):
        """Return ``(view_of_obs, target_points, image_points)`` over all views."""
        pts = self.target.points
        view_ids = np.concatenate(
            [np.full(len(v), i) for i, v in enumerate(self.views)]
        ).astype(int)
        P = np.concatenate([pts[v.indices] for v in self.views])
        p = np.concatenate([v.image_points for v in self.views])
        return view_ids, P, p


# -- rotations ---------------------------------------------------------------

def rotvec_to_matrix(rotvec) -> np.ndarray:
    """Exponential map; accepts ``(3,)`` or ``(n, 3)``."""
    return Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix()


def matrix_to_rotvec(R) -> np.ndarray:
    return Rotation.from_matrix(np.asarray(R, dtype=float)).as_rotvec()


def project_to_so3(M) -> np.ndarray:
    """Closest rotation in Frobenius norm, with the determinant forced to +1."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    S = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ S @ Vt


def rotation_angle(R1, R2) -> float:
    """Geodesic distance between two rotations, radians."""
    c = (np.trace(np.asarray(R1).T @ np.asarray(R2)) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def skew_matrix(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


# -- projection --------------------------------------------------------------

def distort(xn: np.ndarray, dist: RadialDistortion) -> np.ndarray:
    """Apply radial distortion to normalised points of shape ``(n, 2)``."""
    rho2 = np.sum(xn**2, axis=-1, keepdims=True)
    return xn * (1.0 + dist.k1 * rho2 + dist.k2 * rho2**2)


def undistort(xd: np.ndarray, dist: RadialDistortion, iterations: int = 20) -> np.ndarray:
    """Invert :func:`distort` by fixed-point iteration (fine for moderate distortion)."""
    xd = np.asarray(xd, dtype=float)
    xn = xd.copy()
    for _ in range(iterations):
        rho2 = np.sum(xn**2, axis=-1, keepdims=True)
        xn = xd / (1.0 + dist.k1 * rho2 + dist.k2 * rho2**2)
    return xn


def pixels_from_normalized(xd: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    u = K.fx * xd[..., 0] + K.skew * xd[..., 1] + K.cx
    v = K.fy * xd[..., 1] + K.cy
    return np.stack([u, v], axis=-1)


def normalized_from_pixels(p: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    y = (p[..., 1] - K.cy) / K.fy
    x = (p[..., 0] - K.cx - K.skew * y) / K.fx
    return np.stack([x, y], axis=-1)


def project_points(K, dist, R, t_cp, P) -> np.ndarray:
    """Project target points ``P`` of shape ``(n, 3)`` to pixels ``(n, 2)``.

    Raises
    ------
    NonPositiveDepth
        If any point lands at camera-frame depth ``<= 0``; ``err.point`` holds
        the first offending row.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Xc = (P - np.asarray(t_cp, dtype=float)) @ np.asarray(R).T
    bad = np.flatnonzero(Xc[:, 2] <= 0)
    if bad.size:
        raise NonPositiveDepth(f"point {bad[0]} has depth {Xc[bad[0], 2]:.3g}", point=int(bad[0]))
    xn = Xc[:, :2] / Xc[:, 2:3]
    return pixels_from_normalized(distort(xn, dist), K)


def project(K, dist, R, t_cp, P) -> np.ndarray:
    """Project a single target point; see :func:`project_points`."""
    return project_points(K, dist, R, t_cp, np.reshape(P, (1, 3)))[0]


def project_with_pose(K, dist, R, t, P) -> np.ndarray:
    """Project with a free pose ``X = R P + t`` (used for held-out views)."""
    R = np.asarray(R, dtype=float)
    return project_points(K, dist, R, -R.T @ np.asarray(t, dtype=float), P)
