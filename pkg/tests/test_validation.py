import warnings

import numpy as np
import pytest

from collimcal.exceptions import ConditionWarning, TooFewPoints
from collimcal.geometry import rotvec_to_matrix
from collimcal.simulate import SimConfig, generate
from collimcal.validation import (
    SphereFitReport,
    degeneracy_score,
    fit_sphere,
    row_space_residual,
    sphere_motion_report,
)

import oracle
from conftest import axis_rotation_views


def sphere_points(n, c, r, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return c + r * d + noise * rng.normal(size=(n, 3))


def test_exact_sphere():
    c0 = np.array([10.0, -5.0, 700.0])
    c, r, res = fit_sphere(sphere_points(30, c0, 700.0))
    assert np.allclose(c, c0, atol=1e-9)
    assert r == pytest.approx(700.0, abs=1e-9)
    assert res < 1e-9


def test_noisy_sphere_matches_geometric_oracle():
    P = sphere_points(200, np.array([1.0, 2.0, 3.0]), 50.0, noise=0.5, seed=1)
    c, r, _ = fit_sphere(P)
    co, ro = oracle.sphere_fit(P)
    assert np.allclose(c, co, atol=1e-3)
    assert r == pytest.approx(ro, abs=1e-3)


def test_sphere_fit_guards():
    with pytest.raises(TooFewPoints):
        fit_sphere(np.zeros((3, 3)))
    flat = np.column_stack([np.random.default_rng(0).normal(size=(10, 2)), np.zeros(10)])
    with pytest.warns(ConditionWarning):
        fit_sphere(flat)


def exact_poses(n=20, seed=0, t_cp=(150.0, 105.0, -700.0)):
    rng = np.random.default_rng(seed)
    t_cp = np.asarray(t_cp)
    out = []
    for _ in range(n):
        R = rotvec_to_matrix(np.r_[rng.uniform(-0.3, 0.3, 2), rng.uniform(-3, 3)])
        out.append((R, -R @ t_cp))
    return out


def test_exact_spherical_motion_report():
    rep = sphere_motion_report(exact_poses())
    assert isinstance(rep, SphereFitReport)
    assert np.allclose(rep.centroid_mm, [150, 105, -700])
    assert np.allclose(rep.std_mm, 0, atol=1e-9)
    assert rep.mean_radius_mm == pytest.approx(700.0)
    assert rep.fitted_radius_mm == pytest.approx(700.0, abs=1e-9)
    assert rep.fit_rms_mm < 1e-9
    assert np.allclose(rep.axis_intersection_centroid_mm, 0, atol=1e-9)
    assert set(rep.to_dict()) >= {"std_percent_of_radius", "range_mm", "mean_distance_error_mm"}


def test_report_needs_three_poses():
    with pytest.raises(TooFewPoints):
        sphere_motion_report(exact_poses(2))


def test_perturbed_report_spread():
    _, truth = generate(SimConfig(seed=9, n_views=100, sphere_noise_mm=10.0))
    poses = [(R, -R @ c) for R, c in zip(truth.extrinsics.rotations, truth.view_centers)]
    rep = sphere_motion_report(poses)
    assert np.allclose(rep.std_mm, 10.0, rtol=0.25)


def test_degeneracy_score_verdicts():
    cfg = SimConfig()
    axis = [oracle.exact_homography(cfg.intrinsics.K, R, cfg.t_cp) for R in axis_rotation_views(5)[1]]
    score = degeneracy_score(axis)
    assert score.verdict == "degenerate" and score.rank == 10
    assert degeneracy_score(axis[:2]).verdict == "minimal"
    good = [oracle.exact_homography(cfg.intrinsics.K, R, cfg.t_cp) for R, _ in exact_poses(4)]
    assert degeneracy_score(good).verdict == "ok"


def test_row_space_residual():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(10, 11))
    assert row_space_residual(A[:6], rng.normal(size=(3, 6)) @ A[:6]) < 1e-10
    assert row_space_residual(A[:6], A[6:]) > 1e-3
