import numpy as np
import pytest

from collimcal.exceptions import DegenerateConfiguration
from collimcal.geometry import CameraIntrinsics, RadialDistortion, rotvec_to_matrix
from collimcal.minimal import (
    five_constraints,
    hidden_variable_system,
    intrinsics_from_omega,
    lifted_constraint_matrix,
    omega_matrix,
    solve_minimal,
    solve_minimal_homographies,
)
from collimcal.simulate import SimConfig, generate

import oracle

K = CameraIntrinsics(1000.0, 1000.0, 542.0, 478.0, 0.01)
# target units scaled so that c = x + y - |t|^2 is O(1)
T_CP = np.array([0.6, 0.4, -2.5])


def two_views(seed=0):
    rng = np.random.default_rng(seed)
    Rs = [rotvec_to_matrix(np.r_[rng.uniform(-0.3, 0.3, 2), rng.uniform(-np.pi, np.pi)]) for _ in range(2)]
    return [oracle.exact_homography(K.K, R, T_CP, scale=rng.uniform(0.5, 2)) for R in Rs]


def true_omega():
    Ki = np.linalg.inv(K.K)
    O = Ki.T @ Ki
    return np.array([O[0, 0], O[0, 1], O[0, 2], O[1, 1], O[1, 2], O[2, 2]])


def test_true_omega_satisfies_all_constraints():
    w = true_omega()
    t2 = T_CP @ T_CP
    for H in two_views(1):
        rows = five_constraints(H, T_CP[0], T_CP[1], t2)
        scale = np.abs(rows).max() * np.abs(w).max()
        assert np.max(np.abs(rows @ w)) < 1e-10 * scale


def test_lifted_matrix_rank_two_views():
    A = lifted_constraint_matrix(two_views(2))
    assert A.shape == (10, 24)
    assert np.linalg.matrix_rank(A / np.linalg.norm(A, axis=0).clip(1e-300)) == 10


def test_determinant_is_exactly_quadratic():
    system = hidden_variable_system(*two_views(3))
    q = system.det_polynomial()
    for c in (-3.0, -0.37, 2.5, 7.0):
        assert system.det(c) == pytest.approx(np.polyval(q, c), rel=1e-8, abs=1e-12 * np.abs(q).max())
    # the true c is a root
    c_true = T_CP[0] + T_CP[1] - T_CP @ T_CP
    assert abs(np.polyval(q, c_true)) < 1e-9 * np.abs(q).max() * max(1.0, c_true**2)


@pytest.mark.parametrize("seed", range(5))
def test_noise_free_homographies(seed):
    Kr, (x, y, r) = solve_minimal_homographies(*two_views(seed))
    assert np.allclose(Kr.as_array(), K.as_array(), rtol=1e-7, atol=1e-6)
    assert (x, y, r) == pytest.approx((0.6, 0.4, 2.5), rel=1e-7)


def test_ten_row_path_agrees():
    Kr, (x, y, r) = solve_minimal_homographies(*two_views(4), rows=10)
    assert np.allclose(Kr.as_array(), K.as_array(), rtol=1e-6, atol=1e-5)


def test_cholesky_recovery():
    assert np.allclose(intrinsics_from_omega(true_omega()).as_array(), K.as_array())
    assert np.allclose(intrinsics_from_omega(-3 * true_omega()).as_array(), K.as_array())
    assert omega_matrix(true_omega()).shape == (3, 3)


def test_identical_views_are_degenerate():
    H = two_views(0)[0]
    with pytest.raises(DegenerateConfiguration):
        solve_minimal_homographies(H, 2.0 * H)


def test_observation_level_recovery():
    obs, truth = generate(SimConfig(n_views=2, seed=11, distortion=RadialDistortion()))
    Kr, ext = solve_minimal(obs)
    assert np.allclose(Kr.as_array(), truth.intrinsics.as_array(), rtol=1e-6, atol=1e-5)
    assert np.allclose(ext.t_cp, truth.extrinsics.t_cp, atol=1e-4)


def test_needs_two_views(clean_pinhole):
    with pytest.raises(ValueError):
        solve_minimal(clean_pinhole[0])
