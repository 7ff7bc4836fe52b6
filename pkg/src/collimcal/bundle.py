"""Bundle adjustment under the spherical-motion constraint.

Parameter layout (length ``10 + 3N``)::

    [fx, fy, cx, cy, skew, k1, k2, x, y, r, rotvec_0, ..., rotvec_{N-1}]

Rotations are stored as axis-angle vectors but updated multiplicatively,
``R <- exp(delta) R``, so the Jacobian columns of a rotation block are
derivatives with respect to that left perturbation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DivergenceDetected, InvalidInitialization, NonPositiveDepth
from .geometry import (
    CameraIntrinsics,
    PlanarObservations,
    RadialDistortion,
    SphericalExtrinsics,
    matrix_to_rotvec,
    rotvec_to_matrix,
)

logger = logging.getLogger(__name__)

N_GLOBAL = 10
SKEW = 4
RADIUS = 9
MIN_RADIUS = 1e-6


@dataclass
class BAOptions:
    cauchy_scale: float = 2.0
    max_iter: int = 100
    initial_damping: float = 1e-4
    damping_up: float = 10.0
    damping_down: float = 0.1
    max_rejections: int = 10
    rel_cost_tol: float = 1e-12
    grad_tol: float = 1e-10
    freeze_skew: bool = False


@dataclass
class BAReport:
    initial_cost: float
    final_cost: float
    cost_trace: list = field(default_factory=list)
    rms_px: float = 0.0
    iterations: int = 0
    reason: str = ""
    n_params: int = 0

    def to_dict(self) -> dict:
        return {
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "cost_trace": list(self.cost_trace),
            "rms_px": self.rms_px,
            "iterations": self.iterations,
            "reason": self.reason,
            "n_params": self.n_params,
        }


def n_params(n_views: int) -> int:
    return N_GLOBAL + 3 * n_views


def pack(K: CameraIntrinsics, dist: RadialDistortion, ext: SphericalExtrinsics) -> np.ndarray:
    rv = [matrix_to_rotvec(R) for R in ext.rotations]
    return np.concatenate([
        K.as_array(),
        [dist.k1, dist.k2, ext.x, ext.y, ext.radius],
        np.ravel(rv),
    ])


def unpack(params):
    params = np.asarray(params, dtype=float)
    K = CameraIntrinsics(*params[:5])
    dist = RadialDistortion(*params[5:7])
    rot = rotvec_to_matrix(params[N_GLOBAL:].reshape(-1, 3))
    ext = SphericalExtrinsics(params[7], params[8], params[9], list(rot))
    return K, dist, ext


def _camera_points(params, view_ids, P):
    rot = rotvec_to_matrix(params[N_GLOBAL:].reshape(-1, 3))
    t_cp = np.array([params[7], params[8], -params[9]])
    Rv = rot[view_ids]
    Xc = np.einsum("mij,mj->mi", Rv, P - t_cp)
    return Rv, Xc


def _check_depth(Xc, view_ids, obs: PlanarObservations):
    bad = np.flatnonzero(Xc[:, 2] <= 0)
    if bad.size:
        k = bad[0]
        i = int(view_ids[k])
        j = int(obs.views[i].indices[k - sum(len(v) for v in obs.views[:i])])
        raise NonPositiveDepth(f"view {i}, point {j} has depth {Xc[k, 2]:.3g}", view=i, point=j)


def _project_stacked(params, view_ids, P, obs):
    Rv, Xc = _camera_points(params, view_ids, P)
    _check_depth(Xc, view_ids, obs)
    fx, fy, cx, cy, s, k1, k2 = params[:7]
    xn = Xc[:, :2] / Xc[:, 2:3]
    rho2 = np.sum(xn**2, axis=1)
    f = 1.0 + k1 * rho2 + k2 * rho2**2
    xd = xn * f[:, None]
    uv = np.column_stack([fx * xd[:, 0] + s * xd[:, 1] + cx, fy * xd[:, 1] + cy])
    return uv, (Rv, Xc, xn, rho2, f, xd)


def residuals(params, obs: PlanarObservations) -> np.ndarray:
    """Stacked reprojection residuals ``projection - observation``.

    Ordered view-major, then point, then ``u`` before ``v``; length ``2M``.

    Raises
    ------
    NonPositiveDepth
        With ``view`` and ``point`` set to the first offending observation.
    """
    view_ids, P, p = obs.stacked()
    uv, _ = _project_stacked(np.asarray(params, dtype=float), view_ids, P, obs)
    return (uv - p).ravel()


def jacobian(params, obs: PlanarObservations) -> np.ndarray:
    """Analytic Jacobian of :func:`residuals`, shape ``(2M, 10 + 3N)``."""
    params = np.asarray(params, dtype=float)
    view_ids, P, _ = obs.stacked()
    _, (Rv, Xc, xn, rho2, f, xd) = _project_stacked(params, view_ids, P, obs)
    fx, fy, cx, cy, s, k1, k2 = params[:7]
    M = len(view_ids)
    J = np.zeros((M, 2, n_params(obs.n_views)))

    J[:, 0, 0] = xd[:, 0]
    J[:, 1, 1] = xd[:, 1]
    J[:, 0, 2] = 1.0
    J[:, 1, 3] = 1.0
    J[:, 0, 4] = xd[:, 1]
    J[:, 0, 5] = (fx * xn[:, 0] + s * xn[:, 1]) * rho2
    J[:, 1, 5] = fy * xn[:, 1] * rho2
    J[:, 0, 6] = J[:, 0, 5] * rho2
    J[:, 1, 6] = J[:, 1, 5] * rho2

    # chain: pixels <- distorted <- normalised <- camera point
    dpix_dd = np.array([[fx, s], [0.0, fy]])
    g = 2.0 * (k1 + 2.0 * k2 * rho2)
    dd_dn = np.empty((M, 2, 2))
    dd_dn[:, 0, 0] = f + g * xn[:, 0] ** 2
    dd_dn[:, 1, 1] = f + g * xn[:, 1] ** 2
    dd_dn[:, 0, 1] = dd_dn[:, 1, 0] = g * xn[:, 0] * xn[:, 1]
    z = Xc[:, 2]
    dn_dX = np.zeros((M, 2, 3))
    dn_dX[:, 0, 0] = 1.0 / z
    dn_dX[:, 1, 1] = 1.0 / z
    dn_dX[:, 0, 2] = -Xc[:, 0] / z**2
    dn_dX[:, 1, 2] = -Xc[:, 1] / z**2
    A = np.einsum("ij,mjk,mkl->mil", dpix_dd, dd_dn, dn_dX)

    # X = R (P - t_cp), t_cp = (x, y, -r)
    J[:, :, 7] = -np.einsum("mij,mj->mi", A, Rv[:, :, 0])
    J[:, :, 8] = -np.einsum("mij,mj->mi", A, Rv[:, :, 1])
    J[:, :, 9] = np.einsum("mij,mj->mi", A, Rv[:, :, 2])

    # left perturbation: dX/d(delta) = -[X]_x
    skewX = np.zeros((M, 3, 3))
    skewX[:, 0, 1], skewX[:, 0, 2] = -Xc[:, 2], Xc[:, 1]
    skewX[:, 1, 0], skewX[:, 1, 2] = Xc[:, 2], -Xc[:, 0]
    skewX[:, 2, 0], skewX[:, 2, 1] = -Xc[:, 1], Xc[:, 0]
    Jrot = -np.einsum("mij,mjk->mik", A, skewX)
    cols = N_GLOBAL + 3 * view_ids[:, None] + np.arange(3)
    rows = np.arange(M)[:, None]
    J[rows, 0, cols] = Jrot[:, 0, :]
    J[rows, 1, cols] = Jrot[:, 1, :]
    return J.reshape(2 * M, -1)


def apply_update(params, delta) -> np.ndarray:
    """Add ``delta`` to the global block and left-compose it onto rotations."""
    params = np.asarray(params, dtype=float)
    out = params.copy()
    out[:N_GLOBAL] += delta[:N_GLOBAL]
    out[RADIUS] = max(out[RADIUS], MIN_RADIUS)
    R = rotvec_to_matrix(params[N_GLOBAL:].reshape(-1, 3))
    dR = rotvec_to_matrix(np.reshape(delta[N_GLOBAL:], (-1, 3)))
    out[N_GLOBAL:] = matrix_to_rotvec(dR @ R).ravel()
    return out


def cauchy_cost(res, scale: float) -> float:
    s = np.sum(np.reshape(res, (-1, 2)) ** 2, axis=1)
    return float(np.sum(scale**2 * np.log1p(s / scale**2)))


def _cauchy_weights(res, scale: float) -> np.ndarray:
    s = np.sum(np.reshape(res, (-1, 2)) ** 2, axis=1)
    return np.repeat(1.0 / (1.0 + s / scale**2), 2)


def rms(res) -> float:
    """Root mean square over residual components (u and v separately)."""
    res = np.asarray(res)
    return float(np.sqrt(np.mean(res**2))) if res.size else 0.0


def bundle_adjust(K: CameraIntrinsics, dist: RadialDistortion, ext: SphericalExtrinsics,
                  obs: PlanarObservations, options: BAOptions | None = None):
    """Refine all parameters by Levenberg-Marquardt on the Cauchy-robustified
    reprojection error.

    Each iteration solves the reweighted normal equations with additive
    damping in column-normalised variables. A step is accepted when the cost
    does not increase; the damping is multiplied by ``damping_down`` on
    acceptance and ``damping_up`` on rejection.

    Returns
    -------
    K, dist, ext
        Refined parameters.
    report : BAReport

    Raises
    ------
    InvalidInitialization
        If the initial parameters put a point behind the camera.
    DivergenceDetected
        If ``max_rejections`` consecutive steps fail before any step is accepted.
    """
    opt = options or BAOptions()
    b = opt.cauchy_scale
    x = pack(K, dist, ext)
    if obs.n_views != ext.n_views:
        raise ValueError("number of rotations does not match the number of views")
    try:
        res = residuals(x, obs)
    except NonPositiveDepth as err:
        raise InvalidInitialization(str(err)) from err

    cost = cauchy_cost(res, b)
    report = BAReport(initial_cost=cost, final_cost=cost, cost_trace=[cost], n_params=len(x))
    mu = opt.initial_damping
    accepted_any = False
    reason = "max_iter"
    it = 0
    while it < opt.max_iter:
        if cost <= 1e-24:
            reason = "zero_cost"
            break
        it += 1
        J = jacobian(x, obs)
        if opt.freeze_skew:
            J[:, SKEW] = 0.0
        wts = _cauchy_weights(res, b)
        grad = J.T @ (wts * res)
        if np.max(np.abs(2.0 * grad)) < opt.grad_tol:
            reason = "gradient"
            break
        scale = np.sqrt(np.einsum("ij,i,ij->j", J, wts, J))
        scale[scale == 0] = 1.0
        Js = J / scale
        JtJ = Js.T @ (wts[:, None] * Js)
        gs = grad / scale

        for _ in range(opt.max_rejections):
            step = -np.linalg.solve(JtJ + mu * np.eye(len(x)), gs) / scale
            cand = apply_update(x, step)
            try:
                cand_res = residuals(cand, obs)
                cand_cost = cauchy_cost(cand_res, b)
            except NonPositiveDepth:
                cand_cost = np.inf
            if cand_cost <= cost:
                break
            mu *= opt.damping_up
        else:
            predicted = -(gs @ (step * scale))
            if predicted <= opt.rel_cost_tol * cost or accepted_any:
                reason = "no_decrease"
                break
            raise DivergenceDetected(
                f"cost increased for {opt.max_rejections} consecutive damping escalations"
            )

        accepted_any = True
        rel = (cost - cand_cost) / cost if cost > 0 else 0.0
        x, res, cost = cand, cand_res, cand_cost
        report.cost_trace.append(cost)
        mu = max(mu * opt.damping_down, 1e-15)
        if rel < opt.rel_cost_tol:
            reason = "relative_decrease"
            break

    report.final_cost = cost
    report.iterations = it
    report.reason = reason
    report.rms_px = rms(res)
    logger.debug("bundle adjustment: %s after %d iterations, rms %.4g px", reason, it, report.rms_px)
    Kr, dr, er = unpack(x)
    return Kr, dr, er, report
