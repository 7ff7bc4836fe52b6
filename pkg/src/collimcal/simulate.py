"""Synthetic spherical-motion calibration data.

Defaults reproduce the standard virtual rig: a 1080x960 camera with
``fx = fy = 1000``, ``(cx, cy) = (542, 478)``, skew 0.01, radial distortion
``(0.1, -0.2)``, an 11x8 grid with 30 mm pitch and the camera centre at
``(150, 105, -700)`` mm in target coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import NonPositiveDepth, SamplingExhausted
from .geometry import (
    CameraIntrinsics,
    PlanarObservations,
    PlanarTarget,
    RadialDistortion,
    SphericalExtrinsics,
    View,
    project_points,
)

MAX_ATTEMPTS = 1000


@dataclass(frozen=True)
class SimConfig:
    intrinsics: CameraIntrinsics = CameraIntrinsics(1000.0, 1000.0, 542.0, 478.0, 0.01)
    distortion: RadialDistortion = RadialDistortion(0.1, -0.2)
    image_size: tuple = (1080, 960)
    target: PlanarTarget = PlanarTarget(rows=8, cols=11, spacing=30.0)
    x: float = 150.0
    y: float = 105.0
    radius: float = 700.0
    n_views: int = 15
    noise_px: float = 0.0
    sphere_noise_mm: float = 0.0
    seed: int = 0
    cone_half_angle_deg: float = 25.0
    roll_range_deg: float = 180.0
    margin_px: float = 5.0

    @property
    def t_cp(self) -> np.ndarray:
        return np.array([self.x, self.y, -self.radius])

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass
class GroundTruth:
    intrinsics: CameraIntrinsics
    distortion: RadialDistortion
    extrinsics: SphericalExtrinsics
    # per-view camera centres actually used (differ from t_cp when perturbed)
    view_centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))


def _align_z(d: np.ndarray) -> np.ndarray:
    """Rotation taking ``e3`` onto the unit vector ``d`` about ``e3 x d``."""
    axis = np.array([-d[1], d[0], 0.0])
    s = np.linalg.norm(axis)
    if s < 1e-15:
        return np.eye(3)
    axis /= s
    angle = np.arctan2(s, d[2])
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * k @ k


def _rot_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def is_visible(config: SimConfig, R, center) -> bool:
    """True if every target point projects inside the image with the margin."""
    try:
        uv = project_points(config.intrinsics, config.distortion, R, center, config.target.points)
    except NonPositiveDepth:
        return False
    w, h = config.image_size
    m = config.margin_px
    return bool(np.all((uv[:, 0] >= m) & (uv[:, 0] < w - m) & (uv[:, 1] >= m) & (uv[:, 1] < h - m)))


def _draw_rotation(config: SimConfig, rng) -> np.ndarray:
    cos_min = np.cos(np.radians(config.cone_half_angle_deg))
    cos_t = rng.uniform(cos_min, 1.0)
    phi = rng.uniform(0.0, 2 * np.pi)
    sin_t = np.sqrt(max(0.0, 1.0 - cos_t**2))
    d = np.array([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t])
    roll = np.radians(config.roll_range_deg) * rng.uniform(-1.0, 1.0)
    # columns of R^T are the camera axes in the target frame
    return (_align_z(d) @ _rot_z(roll)).T


def sample_pose(config: SimConfig, rng, center=None) -> np.ndarray:
    """Rejection-sample a rotation that keeps the whole target in view.

    Viewing directions are uniform on the cone of half-angle
    ``cone_half_angle_deg`` around the target normal, with a uniform roll in
    ``[-roll_range_deg, roll_range_deg]``.

    Raises
    ------
    SamplingExhausted
        After ``MAX_ATTEMPTS`` rejected draws.
    """
    center = config.t_cp if center is None else np.asarray(center, dtype=float)
    for _ in range(MAX_ATTEMPTS):
        R = _draw_rotation(config, rng)
        if is_visible(config, R, center):
            return R
    raise SamplingExhausted(f"no visible pose after {MAX_ATTEMPTS} attempts")


def generate(config: SimConfig = SimConfig()):
    """Simulate observations and ground truth for ``config``.

    Poses, centre perturbations and pixel noise use independent RNG streams
    derived from ``config.seed``. Unit normals are always drawn and then
    scaled, so changing only ``noise_px`` or ``sphere_noise_mm`` keeps the
    poses and the noise directions of a seed unchanged. Noisy points falling
    outside the image are dropped.

    Returns
    -------
    observations : PlanarObservations
    truth : GroundTruth
    """
    pose_rng, center_rng, noise_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(3)
    )
    target_pts = config.target.points
    w, h = config.image_size
    views, rotations, centers = [], [], []
    for i in range(config.n_views):
        center = config.t_cp + config.sphere_noise_mm * center_rng.normal(size=3)
        R = sample_pose(config, pose_rng, center)
        uv = project_points(config.intrinsics, config.distortion, R, center, target_pts)
        uv = uv + config.noise_px * noise_rng.normal(size=uv.shape)
        keep = (uv[:, 0] >= 0) & (uv[:, 0] < w) & (uv[:, 1] >= 0) & (uv[:, 1] < h)
        views.append(View(np.flatnonzero(keep), uv[keep], view_id=i))
        rotations.append(R)
        centers.append(center)
    obs = PlanarObservations(config.target, views, tuple(config.image_size))
    truth = GroundTruth(
        config.intrinsics,
        config.distortion,
        SphericalExtrinsics(config.x, config.y, config.radius, rotations),
        np.array(centers),
    )
    return obs, truth
