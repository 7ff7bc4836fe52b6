"""Two-view minimal solver for the image of the absolute conic.

For each view the five constraints on ``w`` (``omega = K^-T K^-1`` as a
6-vector) are folded into three rows that are linear in the single unknown
``c = x + y - |t_cp|^2``. Two views give a 6x6 matrix ``C(c) = C0 + c C1``
whose determinant is a quadratic in ``c``; each real root yields ``w`` as the
null vector of ``C(c)`` and ``K`` follows by Cholesky.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .closed_form import pixel_normalizer
from .exceptions import (
    DegenerateConfiguration,
    NoRealRoot,
    NotConsistent,
    NotPositiveDefinite,
    SingularHomography,
)
from .geometry import CameraIntrinsics, PlanarObservations, SphericalExtrinsics
from .homography import Homography, estimate_homography, rotation_from_homography

SAMPLE_POINTS = (-1.0, 0.0, 1.0)
IMAG_TOL = 1e-6
RADICAND_TOL = 1e-9


def _matrix(H) -> np.ndarray:
    return H.matrix if isinstance(H, Homography) else np.asarray(H, dtype=float)


def v_row(H, m: int, n: int) -> np.ndarray:
    """Row ``v_mn`` with ``v_mn @ w = h_m^T omega h_n`` for columns of ``H`` (0-based)."""
    h = _matrix(H)
    return np.array([
        h[0, m] * h[0, n],
        h[0, m] * h[1, n] + h[0, n] * h[1, m],
        h[0, m] * h[2, n] + h[0, n] * h[2, m],
        h[1, m] * h[1, n],
        h[1, m] * h[2, n] + h[1, n] * h[2, m],
        h[2, m] * h[2, n],
    ])


def constraint_rows(H):
    """Rows of one view for the hidden-variable system.

    Returns
    -------
    v12, v11_minus_v22 : (6,) ndarray
        Rows annihilating ``w`` directly.
    (v_const, v11) : pair of (6,) ndarray
        The c-linear row is ``v_const + c * v11``.
    """
    h = _matrix(H)
    if abs(np.linalg.det(h)) < 1e-14 * np.linalg.norm(h) ** 3:
        raise SingularHomography("homography is singular")
    v11, v22 = v_row(h, 0, 0), v_row(h, 1, 1)
    v_const = v_row(h, 0, 2) + v_row(h, 1, 2) + v_row(h, 2, 2)
    return v_row(h, 0, 1), v11 - v22, (v_const, v11)


def five_constraints(H, x, y, t2) -> np.ndarray:
    """All five per-view constraint rows for a known centre (5x6)."""
    h = _matrix(H)
    v11 = v_row(h, 0, 0)
    return np.array([
        v_row(h, 0, 1),
        v11 - v_row(h, 1, 1),
        v_row(h, 0, 2) + x * v11,
        v_row(h, 1, 2) + y * v11,
        v_row(h, 2, 2) - t2 * v11,
    ])


def lifted_constraint_matrix(homographies) -> np.ndarray:
    """Stack the five constraints of each view, linear in ``[w, x w, y w, t2 w]``.

    Returns a ``5N x 24`` matrix; two generic views give rank 10.
    """
    rows = []
    z = np.zeros(6)
    for H in homographies:
        h = _matrix(H)
        v11 = v_row(h, 0, 0)
        rows += [
            np.concatenate([v_row(h, 0, 1), z, z, z]),
            np.concatenate([v11 - v_row(h, 1, 1), z, z, z]),
            np.concatenate([v_row(h, 0, 2), v11, z, z]),
            np.concatenate([v_row(h, 1, 2), z, v11, z]),
            np.concatenate([v_row(h, 2, 2), z, z, -v11]),
        ]
    return np.array(rows)


@dataclass
class HiddenVariableSystem:
    """``C(c) = C0 + c * C1`` for two views."""

    C0: np.ndarray
    C1: np.ndarray

    def __call__(self, c: float) -> np.ndarray:
        return self.C0 + c * self.C1

    def det(self, c: float) -> float:
        return float(np.linalg.det(self(c)))

    def det_polynomial(self) -> np.ndarray:
        """Coefficients ``(q2, q1, q0)`` interpolated at ``c = -1, 0, 1``."""
        dm, d0, dp = (self.det(c) for c in SAMPLE_POINTS)
        return np.array([(dp + dm) / 2.0 - d0, (dp - dm) / 2.0, d0])


def hidden_variable_system(H_a, H_b) -> HiddenVariableSystem:
    C0, C1 = np.zeros((6, 6)), np.zeros((6, 6))
    for k, H in enumerate((H_a, H_b)):
        r12, r1122, (v_const, v11) = constraint_rows(H)
        C0[3 * k] = r12
        C0[3 * k + 1] = r1122
        C0[3 * k + 2] = v_const
        C1[3 * k + 2] = v11
    return HiddenVariableSystem(C0, C1)


def real_roots(coeffs) -> np.ndarray:
    """Real roots of the quadratic, dropping genuinely complex pairs.

    Raises
    ------
    NoRealRoot
        If every root has an imaginary part above ``IMAG_TOL * |real part|``.
    """
    roots = np.roots(coeffs)
    keep = [z.real for z in roots if abs(z.imag) <= IMAG_TOL * max(abs(z.real), 1e-300)]
    if not keep:
        raise NoRealRoot(f"det(C(c)) has no real root (roots {roots})")
    return np.array(keep)


def omega_matrix(w) -> np.ndarray:
    W11, W12, W13, W22, W23, W33 = w
    return np.array([[W11, W12, W13], [W12, W22, W23], [W13, W23, W33]])


def intrinsics_from_omega(w) -> CameraIntrinsics:
    """Recover ``K`` from ``omega = K^-T K^-1`` by Cholesky.

    ``omega = U^T U`` with ``U`` upper triangular, ``K = U^-1`` scaled to a
    unit (3, 3) entry. Both signs of ``w`` are tried.

    Raises
    ------
    NotPositiveDefinite
    """
    for sign in (1.0, -1.0):
        try:
            L = np.linalg.cholesky(sign * omega_matrix(w))
        except np.linalg.LinAlgError:
            continue
        K = np.linalg.inv(L.T)
        K = K / K[2, 2]
        if K[0, 0] > 0 and K[1, 1] > 0:
            return CameraIntrinsics.from_matrix(K)
    raise NotPositiveDefinite("omega is not positive definite for either sign")


def _null_vector(C) -> np.ndarray:
    w = np.linalg.svd(C)[2][-1]
    w = w / np.linalg.norm(w)
    return -w if w[5] < 0 else w


def center_from_omega(homographies, w):
    """Back-substitute ``x``, ``y`` and ``|t_cp|^2``, averaged over views."""
    xs, ys, t2s = [], [], []
    for H in homographies:
        s = v_row(H, 0, 0) @ w
        xs.append(-(v_row(H, 0, 2) @ w) / s)
        ys.append(-(v_row(H, 1, 2) @ w) / s)
        t2s.append((v_row(H, 2, 2) @ w) / s)
    return float(np.mean(xs)), float(np.mean(ys)), float(np.mean(t2s))


def constraint_residual(homographies, w, x, y, t2) -> float:
    """Norm of all per-view constraints, each scaled by its ``v11 @ w``."""
    res = []
    for H in homographies:
        s = v_row(H, 0, 0) @ w
        res.append(five_constraints(H, x, y, t2) @ w / s)
    return float(np.linalg.norm(np.concatenate(res)))


def _refine_all_rows(homographies, x, y, t2):
    """Minimise the smallest singular value of the full 10-row system over ``(x, y, t2)``."""

    def sigma_min(p):
        C = np.vstack([five_constraints(H, *p) for H in homographies])
        C = C / np.linalg.norm(C, axis=1, keepdims=True)
        return np.linalg.svd(C, compute_uv=False)[-1]

    res = minimize(sigma_min, [x, y, t2], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000})
    C = np.vstack([five_constraints(H, *res.x) for H in homographies])
    C = C / np.linalg.norm(C, axis=1, keepdims=True)
    return _null_vector(C), tuple(res.x)


def solve_minimal_homographies(H_a, H_b, rows: int = 6, return_info: bool = False):
    """Solve intrinsics and centre from two conditioned homographies.

    Returns ``(K, (x, y, r))`` in the units the homographies are expressed in.
    """
    Ha, Hb = Homography(_matrix(H_a)).matrix, Homography(_matrix(H_b)).matrix
    if np.linalg.norm(Ha - Hb) < 1e-9:
        raise DegenerateConfiguration("the two views have the same homography")
    Hs = (Ha, Hb)
    system = hidden_variable_system(Ha, Hb)
    coeffs = system.det_polynomial()
    if not np.any(np.abs(coeffs) > 0):
        raise DegenerateConfiguration("det(C(c)) vanishes identically")
    roots = real_roots(coeffs)

    candidates = []
    for c in roots:
        w = _null_vector(system(c))
        try:
            K = intrinsics_from_omega(w)
        except NotPositiveDefinite:
            continue
        x, y, t2 = center_from_omega(Hs, w)
        score = constraint_residual(Hs, w, x, y, t2)
        candidates.append((score, abs(c), c, w, K, (x, y, t2)))
    if not candidates:
        raise NotPositiveDefinite("no root of det(C(c)) gives a positive definite omega")
    candidates.sort(key=lambda item: item[0])
    best = candidates[0]
    # near-ties go to the smaller |c|
    ties = [cand for cand in candidates if cand[0] - best[0] < 1e-12]
    score, _, c, w, K, (x, y, t2) = min(ties, key=lambda item: item[1])

    if rows == 10:
        w, (x, y, t2) = _refine_all_rows(Hs, x, y, t2)
        K = intrinsics_from_omega(w)
    elif rows != 6:
        raise ValueError("rows must be 6 or 10")

    r2 = t2 - x**2 - y**2
    if r2 < 0:
        if r2 < -RADICAND_TOL:
            raise NotConsistent(f"|t_cp|^2 - x^2 - y^2 = {r2:.3g} is negative")
        r2 = 0.0
    r = float(np.sqrt(r2))
    if not return_info:
        return K, (x, y, r)
    info = {"coeffs": coeffs, "roots": roots, "c": c, "w": w, "score": score}
    return K, (x, y, r), info


def target_scale(points) -> float:
    """Mean distance of target points from their centroid, used to make ``c`` O(1)."""
    P = np.asarray(points, dtype=float)[:, :2]
    return float(np.mean(np.linalg.norm(P - P.mean(axis=0), axis=1)))


def solve_minimal(observations: PlanarObservations, rows: int = 6, condition: bool = True):
    """Calibrate from exactly two views.

    Pixel coordinates are conditioned as in the closed-form solver and target
    coordinates are divided by :func:`target_scale` before the polynomial is
    formed; both are undone on the result.

    Returns
    -------
    intrinsics : CameraIntrinsics
    extrinsics : SphericalExtrinsics
    """
    if observations.n_views != 2:
        raise ValueError(f"minimal solver takes exactly 2 views, got {observations.n_views}")
    Hs = []
    for i, view in enumerate(observations.views):
        try:
            Hs.append(estimate_homography(observations.object_points(i), view.image_points))
        except DegenerateConfiguration as err:
            raise DegenerateConfiguration(f"view {i}: {err}") from err
    N = pixel_normalizer(observations.image_size) if condition else np.eye(3)
    L = target_scale(observations.target.points)
    S = np.diag([L, L, 1.0])
    Kn, (x, y, r) = solve_minimal_homographies(N @ Hs[0].matrix @ S, N @ Hs[1].matrix @ S, rows)
    K = CameraIntrinsics.from_matrix(np.linalg.solve(N, Kn.K))
    rotations = [rotation_from_homography(H, K)[0] for H in Hs]
    return K, SphericalExtrinsics(x * L, y * L, r * L, rotations)
