"""Linear calibration from three or more spherical-motion views.

Each view contributes the entries of ``H_i^-1 W H_i^-T = A / lambda_i1^2``
with ``W = K K^T`` (``W33 = 1``) and a symmetric matrix ``A`` that depends
only on the camera centre. Stacking all views gives a linear system in the 5
free entries of ``W`` and the 6 entries of ``A``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConditionWarning,
    DegenerateConfiguration,
    GaugeViolation,
    NonPositiveDefinite,
    SingularHomography,
    TooFewViews,
)
from .geometry import CameraIntrinsics, PlanarObservations, SphericalExtrinsics
from .homography import Homography, estimate_homography, rotation_from_homography

RANK_TOL = 1e-8
RADICAND_TOL = 1e-9

# upper-triangle entries of a symmetric 3x3 in (11, 12, 13, 22, 23, 33) order
SYM_INDEX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


@dataclass
class LinearSystem:
    """Stacked system ``D @ [w; a] = b`` with one 6-row block per view."""

    D: np.ndarray
    b: np.ndarray
    ratios: np.ndarray
    base_index: int

    @property
    def n_views(self) -> int:
        return len(self.ratios)


def _as_matrix(H) -> np.ndarray:
    return H.matrix if isinstance(H, Homography) else Homography(H).matrix


def scale_ratio(H_i, H_base) -> float:
    """Relative scale ``lambda_i / lambda_base`` as the real cube root of
    ``det(H_base^-1 H_i)``.

    Both homographies are brought to the unit-norm gauge first, so the result
    does not depend on how the caller scaled them.
    """
    Hi, Hb = _as_matrix(H_i), _as_matrix(H_base)
    di, db = np.linalg.det(Hi), np.linalg.det(Hb)
    if abs(di) < 1e-14 or abs(db) < 1e-14:
        raise SingularHomography(f"homography determinant too small ({di:.3g}, {db:.3g})")
    arg = di / db
    if arg <= 0:
        raise GaugeViolation(f"det(H_base^-1 H_i) = {arg:.3g} is not positive")
    return float(np.cbrt(arg))


def constraint_block(H_inv: np.ndarray):
    """Return ``(V, b)`` for one view: rows ``v_mn`` built from ``H^-1`` entries.

    ``V`` is 6x5 (coefficients of ``W11, W12, W13, W22, W23``) and
    ``b = -h_m3 h_n3`` carries the known ``W33 = 1`` column.
    """
    h = H_inv
    V = np.empty((6, 5))
    b = np.empty(6)
    for k, (m, n) in enumerate(SYM_INDEX):
        V[k] = [
            h[m, 0] * h[n, 0],
            h[m, 0] * h[n, 1] + h[m, 1] * h[n, 0],
            h[m, 0] * h[n, 2] + h[m, 2] * h[n, 0],
            h[m, 1] * h[n, 1],
            h[m, 1] * h[n, 2] + h[m, 2] * h[n, 1],
        ]
        b[k] = -h[m, 2] * h[n, 2]
    return V, b


def build_linear_system(homographies, base_index: int = 0, min_views: int = 3) -> LinearSystem:
    """Assemble the stacked ``6N x 11`` system.

    Raises
    ------
    TooFewViews
        If fewer than ``min_views`` homographies are given.
    """
    Hs = [_as_matrix(H) for H in homographies]
    if len(Hs) < min_views:
        raise TooFewViews(f"closed-form solver needs at least {min_views} views, got {len(Hs)}")
    Hb = Hs[base_index]
    ratios = np.array([scale_ratio(H, Hb) for H in Hs])
    D = np.zeros((6 * len(Hs), 11))
    b = np.zeros(6 * len(Hs))
    for i, (H, lam) in enumerate(zip(Hs, ratios)):
        V, bi = constraint_block(np.linalg.inv(H))
        rows = slice(6 * i, 6 * i + 6)
        D[rows, :5] = V
        D[rows, 5:] = -np.eye(6) / lam**2
        b[rows] = bi
    return LinearSystem(D, b, ratios, base_index)


def numerical_rank(D, tol: float = RANK_TOL):
    """Rank of ``D`` after scaling its columns to unit norm.

    Returns ``(rank, singular_values)``; singular values are relative to the
    largest one.
    """
    D = np.asarray(D, dtype=float)
    norms = np.linalg.norm(D, axis=0)
    norms[norms == 0] = 1.0
    s = np.linalg.svd(D / norms, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0, s
    s = s / s[0]
    return int(np.sum(s >= tol)), s


def solve_linear_system(system: LinearSystem, tol: float = RANK_TOL):
    """Least-squares ``[w; a]`` through an SVD of the column-equilibrated ``D``."""
    rank, _ = numerical_rank(system.D, tol)
    if rank < 11:
        raise DegenerateConfiguration(
            f"closed-form system has rank {rank} < 11; views add no independent constraints"
        )
    norms = np.linalg.norm(system.D, axis=0)
    z, *_ = np.linalg.lstsq(system.D / norms, system.b, rcond=None)
    return z / norms


def _sqrt_checked(value: float, name: str, clamped: list) -> float:
    if value < 0:
        if value < -RADICAND_TOL:
            raise NonPositiveDefinite(f"negative radicand for {name}: {value:.3g}")
        clamped.append(name)
        return 0.0
    return float(np.sqrt(value))


def intrinsics_from_dual_conic(w, clamped=None) -> CameraIntrinsics:
    """Decompose ``W = K K^T`` given its 5 free entries (``W33 = 1``)."""
    clamped = [] if clamped is None else clamped
    W11, W12, W13, W22, W23 = w
    cx, cy = W13, W23
    fy = _sqrt_checked(W22 - cy**2, "fy", clamped)
    if fy == 0:
        raise NonPositiveDefinite("fy collapsed to zero")
    skew = (W12 - cx * cy) / fy
    fx = _sqrt_checked(W11 - cx**2 - skew**2, "fx", clamped)
    if fx == 0:
        raise NonPositiveDefinite("fx collapsed to zero")
    return CameraIntrinsics(fx, fy, cx, cy, skew)


def center_from_matrix(a, clamped=None):
    """Camera-centre offsets ``(x, y)`` and radius ``r > 0`` from the 6-vector ``a``."""
    clamped = [] if clamped is None else clamped
    A11, A12, A13, A22, A23, A33 = a
    if A33 <= 0:
        raise NonPositiveDefinite(f"A33 = {A33:.3g} must be positive")
    x, y = A13 / A33, A23 / A33
    r = _sqrt_checked(A11 / A33 - x**2, "r", clamped)
    if r == 0:
        raise NonPositiveDefinite("radius collapsed to zero")
    return x, y, r


def dual_conic_vector(K: CameraIntrinsics) -> np.ndarray:
    W = K.K @ K.K.T
    return np.array([W[0, 0], W[0, 1], W[0, 2], W[1, 1], W[1, 2]])


def center_vector(x, y, r, lam_base) -> np.ndarray:
    """Ground-truth 6-vector ``a`` for a given centre and base-view scale."""
    A = np.array([[r**2 + x**2, x * y, x], [x * y, r**2 + y**2, y], [x, y, 1.0]])
    A /= (lam_base * r) ** 2
    return np.array([A[m, n] for m, n in SYM_INDEX])


def default_base_view(observations: PlanarObservations) -> int:
    """Index of the view with most correspondences (lowest index on ties)."""
    return int(np.argmax([len(v) for v in observations.views]))


def pixel_normalizer(image_size) -> np.ndarray:
    """Similarity moving the image centre to the origin and scaling by ``(w + h) / 2``.

    Left-multiplying every homography by this matrix keeps ``K`` upper
    triangular, so the solution maps back exactly; it only changes how the
    algebraic residuals are weighted under noise.
    """
    w, h = image_size
    f0 = (w + h) / 2.0
    return np.array([[1 / f0, 0.0, -w / 2 / f0], [0.0, 1 / f0, -h / 2 / f0], [0.0, 0.0, 1.0]])


def solve_homographies(homographies, base_index: int = 0, return_info: bool = False,
                       normalizer=None):
    """Closed-form intrinsics and camera centre from precomputed homographies.

    ``normalizer``, if given, is a pixel-space conditioning matrix (see
    :func:`pixel_normalizer`) applied to the homographies before solving.

    Returns
    -------
    intrinsics : CameraIntrinsics
    (x, y, r) : tuple of float
    info : dict, only if ``return_info``
    """
    if normalizer is not None:
        homographies = [Homography(normalizer @ _as_matrix(H)) for H in homographies]
    system = build_linear_system(homographies, base_index)
    sol = solve_linear_system(system)
    w, a = sol[:5], sol[5:]
    clamped = []
    K = intrinsics_from_dual_conic(w, clamped)
    if normalizer is not None:
        K = CameraIntrinsics.from_matrix(np.linalg.solve(normalizer, K.K))
    x, y, r = center_from_matrix(a, clamped)
    if clamped:
        warnings.warn(f"clamped negative radicands for {clamped}", ConditionWarning, stacklevel=2)
    if not return_info:
        return K, (x, y, r)
    A = np.zeros((3, 3))
    for v, (m, n) in zip(a, SYM_INDEX):
        A[m, n] = A[n, m] = v
    info = {
        "w": w,
        "a": a,
        "ratios": system.ratios,
        "clamped": clamped,
        "min_eig_A": float(np.linalg.eigvalsh(A)[0]),
        "residual": float(np.linalg.norm(system.D @ sol - system.b)),
    }
    return K, (x, y, r), info


def solve_closed_form(observations: PlanarObservations, base_index: int | None = None,
                      condition: bool = True):
    """Estimate intrinsics and spherical extrinsics from ``N >= 3`` views.

    Distortion is assumed zero at this stage. With ``condition`` the pixel
    coordinates are normalised by :func:`pixel_normalizer` before solving.

    Returns
    -------
    intrinsics : CameraIntrinsics
    extrinsics : SphericalExtrinsics
    """
    if observations.n_views < 3:
        raise TooFewViews(f"closed-form solver needs at least 3 views, got {observations.n_views}")
    if base_index is None:
        base_index = default_base_view(observations)
    Hs = []
    for i, view in enumerate(observations.views):
        try:
            Hs.append(estimate_homography(observations.object_points(i), view.image_points))
        except DegenerateConfiguration as err:
            raise DegenerateConfiguration(f"view {i}: {err}") from err
    N = pixel_normalizer(observations.image_size) if condition else None
    K, (x, y, r) = solve_homographies(Hs, base_index, normalizer=N)
    rotations = [rotation_from_homography(H, K)[0] for H in Hs]
    return K, SphericalExtrinsics(x, y, r, rotations)
