import numpy as np
import pytest

from collimcal.exceptions import SamplingExhausted
from collimcal.geometry import project_points
from collimcal.simulate import SimConfig, generate, is_visible, sample_pose

import oracle


def test_default_rig_shape():
    obs, truth = generate(SimConfig(seed=7, noise_px=0.5))
    assert obs.n_views == 15
    assert all(len(v) == 88 for v in obs.views)
    assert obs.image_size == (1080, 960)
    assert np.allclose(truth.extrinsics.t_cp, [150, 105, -700])


def test_noise_free_points_are_exact_projections(clean_data):
    obs, truth = clean_data
    K, d, e = truth.intrinsics, truth.distortion, truth.extrinsics
    for i, v in enumerate(obs.views):
        want = oracle.project_all(K.K, d.k1, d.k2, e.rotations[i], e.t_cp, obs.object_points(i))
        assert np.allclose(v.image_points, want, atol=1e-9)


def test_deterministic_per_seed():
    a, _ = generate(SimConfig(seed=1, noise_px=1.0))
    b, _ = generate(SimConfig(seed=1, noise_px=1.0))
    c, _ = generate(SimConfig(seed=2, noise_px=1.0))
    assert all(np.array_equal(x.image_points, y.image_points) for x, y in zip(a.views, b.views))
    assert not np.allclose(a.views[0].image_points, c.views[0].image_points)


def test_noise_level_keeps_poses_and_directions():
    _, t0 = generate(SimConfig(seed=3))
    o1, t1 = generate(SimConfig(seed=3, noise_px=1.0))
    o2, t2 = generate(SimConfig(seed=3, noise_px=2.0))
    for R0, R1 in zip(t0.extrinsics.rotations, t1.extrinsics.rotations):
        assert np.allclose(R0, R1)
    clean, _ = generate(SimConfig(seed=3))
    n1 = o1.views[0].image_points - clean.views[0].image_points
    n2 = o2.views[0].image_points - clean.views[0].image_points
    assert np.allclose(n2, 2 * n1)


def test_noise_statistics():
    obs, _ = generate(SimConfig(seed=4, noise_px=1.0, n_views=30))
    clean, _ = generate(SimConfig(seed=4, n_views=30))
    d = np.concatenate([a.image_points - b.image_points for a, b in zip(obs.views, clean.views)])
    assert d.std() == pytest.approx(1.0, rel=0.05)
    assert abs(d.mean()) < 0.05


def test_sphere_perturbation_moves_centres():
    _, truth = generate(SimConfig(seed=5, sphere_noise_mm=15.0, n_views=200))
    spread = truth.view_centers.std(axis=0, ddof=1)
    assert np.allclose(spread, 15.0, rtol=0.15)
    _, flat = generate(SimConfig(seed=5, n_views=5))
    assert np.allclose(flat.view_centers, [150, 105, -700])


def test_every_sampled_pose_is_visible():
    cfg = SimConfig()
    rng = np.random.default_rng(0)
    for _ in range(20):
        R = sample_pose(cfg, rng)
        assert is_visible(cfg, R, cfg.t_cp)
        uv = project_points(cfg.intrinsics, cfg.distortion, R, cfg.t_cp, cfg.target.points)
        assert uv.min() >= 0 and uv[:, 0].max() < 1080 and uv[:, 1].max() < 960


def test_sampling_exhausted_for_impossible_rig():
    cfg = SimConfig(radius=50.0)
    with pytest.raises(SamplingExhausted):
        sample_pose(cfg, np.random.default_rng(0))
