"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are the stated ones. The lines are collected and repeated in the
terminal summary, so they are visible without ``-s``.
"""

import time

import numpy as np
import pytest

from collimcal import io
from collimcal.bundle import BAOptions, bundle_adjust, jacobian, n_params, pack, residuals
from collimcal.cli import main
from collimcal.closed_form import build_linear_system, numerical_rank, solve_closed_form
from collimcal.estimator import SphericalCalibrator
from collimcal.evaluation import evaluate
from collimcal.experiments import median_of, run_trials
from collimcal.geometry import RadialDistortion, rotvec_to_matrix
from collimcal.homography import estimate_homography
from collimcal.minimal import hidden_variable_system, solve_minimal
from collimcal.simulate import SimConfig, generate
from collimcal.validation import fit_sphere, row_space_residual, sphere_motion_report

import oracle
from conftest import axis_rotation_views

TRIALS = 200
PINHOLE = RadialDistortion()
RESULTS = []


def record(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def rel_err(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))


def test_criterion_01_closed_form_round_trip():
    obs, truth = generate(SimConfig(seed=0, distortion=PINHOLE))
    t0 = time.perf_counter()
    K, ext = solve_closed_form(obs)
    elapsed = time.perf_counter() - t0
    errs = rel_err(K.as_array(), truth.intrinsics.as_array())
    t_err = np.max(np.abs(ext.t_cp - truth.extrinsics.t_cp))
    ok = errs.max() < 1e-6 and t_err < 1e-5 and elapsed < 1.0
    record(1, ok, f"max rel K err {errs.max():.2e}, t_cp err {t_err:.2e} mm, "
                  f"{elapsed * 1e3:.1f} ms")


def test_criterion_02_minimal_round_trip():
    obs, truth = generate(SimConfig(seed=0, n_views=2, distortion=PINHOLE))
    K, ext = solve_minimal(obs)
    errs = rel_err(K.as_array(), truth.intrinsics.as_array())

    # degree check: det(C(c)) sampled at many points is reproduced by the
    # quadratic interpolated from three of them, and a cubic fit has no c^3 term
    Hs = [estimate_homography(obs.object_points(i), v.image_points).matrix
          for i, v in enumerate(obs.views)]
    system = hidden_variable_system(*Hs)
    q = system.det_polynomial()
    cs = np.linspace(-4, 4, 17)
    dets = np.array([system.det(c) for c in cs])
    scale = np.abs(dets).max()
    quad_dev = np.max(np.abs(dets - np.polyval(q, cs))) / scale
    cubic = np.polyfit(cs, dets / scale, 3)
    ok = errs.max() < 1e-6 and quad_dev < 1e-9 and abs(cubic[0]) < 1e-9
    record(2, ok, f"max rel K err {errs.max():.2e}, quadratic deviation {quad_dev:.1e}, "
                  f"cubic coeff {cubic[0]:.1e}")


def test_criterion_03_initial_value_accuracy():
    t0 = time.perf_counter()
    rows = run_trials(SimConfig(noise_px=1.0, distortion=PINHOLE), TRIALS, stage="init")
    elapsed = time.perf_counter() - t0
    focal = median_of(rows, "focal_rel")
    pp = median_of(rows, "pp_px")
    ok = focal < 0.005 and pp < 2.0 and elapsed < 60.0
    record(3, ok, f"median focal err {100 * focal:.3f}% (<0.5%), median pp err {pp:.3f} px (<2.0), "
                  f"{elapsed:.1f} s for {TRIALS} trials")


@pytest.fixture(scope="module")
def post_ba_noise_medians():
    return {s: median_of(run_trials(SimConfig(noise_px=s), TRIALS, stage="ba"), "focal_rel")
            for s in (1.0, 2.0)}


def test_criterion_04_linear_noise_trend(post_ba_noise_medians):
    m1, m2 = post_ba_noise_medians[1.0], post_ba_noise_medians[2.0]
    ratio = m2 / m1
    record(4, 1.5 <= ratio <= 3.0, f"median focal err {100 * m1:.3f}% at 1 px, {100 * m2:.3f}% at 2 px, "
                                   f"ratio {ratio:.2f} (in [1.5, 3])")


def test_criterion_05_view_count_trend():
    med = {n: median_of(run_trials(SimConfig(noise_px=0.5, n_views=n), TRIALS, stage="ba"), "focal_rel")
           for n in (3, 5, 30)}
    ok = med[5] < med[3] and med[30] <= med[5]
    record(5, ok, "median focal err " + ", ".join(f"N={n}: {100 * v:.3f}%" for n, v in med.items()))


def test_criterion_06_imperfect_sphere():
    levels = (0.0, 5.0, 10.0, 15.0, 30.0)
    med = [median_of(run_trials(SimConfig(noise_px=0.5, sphere_noise_mm=s), TRIALS, stage="ba"),
                     "focal_rel") for s in levels]
    monotone = all(b >= a for a, b in zip(med, med[1:]))
    # the unperturbed pipeline (same rig, seeds and stage as criteria 4 and 5)
    baseline = median_of(run_trials(SimConfig(noise_px=0.5), TRIALS, stage="ba"), "focal_rel")
    ok = monotone and med[0] == baseline
    record(6, ok, "median focal err " + ", ".join(f"{s:g} mm: {100 * m:.3f}%" for s, m in zip(levels, med))
                  + f"; sigma_t=0 equals baseline {100 * baseline:.3f}%: {med[0] == baseline}")


def test_criterion_07_degeneracy(tmp_path):
    obs, rots = axis_rotation_views(5)
    path = tmp_path / "axis.json"
    io.write_json(path, io.observations_to_dict(obs))
    code = main(["calibrate", "--input", str(path)])

    Hs = [estimate_homography(obs.object_points(i), v.image_points) for i, v in enumerate(obs.views)]
    D5 = build_linear_system(Hs).D
    D2 = build_linear_system(Hs[:2], min_views=2).D
    r5, r2 = numerical_rank(D5)[0], numerical_rank(D2)[0]
    resid = row_space_residual(D2, D5[12:])
    # independent check on exact homographies
    cfg = SimConfig()
    exact = [oracle.exact_homography(cfg.intrinsics.K, R, cfg.t_cp) for R in rots]
    De, _ = oracle.linear_system(exact)
    r_oracle = oracle.equilibrated_rank(De)
    ok = code == 4 and r5 == r2 == r_oracle and resid < 1e-8
    record(7, ok, f"calibrate exit {code} (want 4), rank(D) {r5} vs 2-view {r2} (oracle {r_oracle}), "
                  f"row-space residual {resid:.1e}")


def test_criterion_08_bundle_adjustment_contract():
    obs, truth = generate(SimConfig(seed=1, noise_px=0.5, n_views=6))
    x0 = pack(truth.intrinsics, truth.distortion, truth.extrinsics)
    length_ok = len(x0) == n_params(6) == 10 + 3 * 6

    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(50):
        x = x0.copy()
        x[:5] *= 1 + 0.02 * rng.normal(size=5)
        x[5:7] += 0.05 * rng.normal(size=2)
        x[7:10] += 5.0 * rng.normal(size=3)
        x[10:] += 0.02 * rng.normal(size=x.size - 10)
        Jn = oracle.finite_difference_jacobian(lambda q: residuals(q, obs), x)
        worst = max(worst, np.linalg.norm(jacobian(x, obs) - Jn) / np.linalg.norm(Jn))

    runs, monotone = 0, True
    for seed in range(10):
        for sigma in (0.0, 0.5, 2.0):
            for nv in (3, 15):
                o, _ = generate(SimConfig(seed=seed, noise_px=sigma, n_views=nv))
                K, e = solve_closed_form(o)
                *_, rep = bundle_adjust(K, RadialDistortion(), e, o, BAOptions())
                monotone &= bool(np.all(np.diff(rep.cost_trace) <= 0))
                runs += 1
    ok = length_ok and worst < 1e-4 and monotone
    record(8, ok, f"length {len(x0)} = 10 + 3N: {length_ok}, worst Jacobian rel diff {worst:.1e} "
                  f"over 50 points, monotone costs in {runs} runs: {monotone}")


def test_criterion_09_sphere_verification():
    rng = np.random.default_rng(0)
    t_cp = np.array([150.0, 105.0, -700.0])
    poses = []
    for _ in range(30):
        R = rotvec_to_matrix(np.r_[rng.uniform(-0.3, 0.3, 2), rng.uniform(-np.pi, np.pi)])
        poses.append((R, -R @ t_cp))
    exact = sphere_motion_report(poses)
    radius_err = abs(exact.fitted_radius_mm - 700.0)
    # the fit on its own, on points of a known sphere
    c, r, res = fit_sphere(np.array([R @ np.r_[150.0, 105.0, 0.0] + t for R, t in poses]))
    exact_ok = radius_err < 1e-9 and exact.fit_rms_mm < 1e-9 and abs(r - 700.0) < 1e-9 and res < 1e-9

    _, truth = generate(SimConfig(seed=0, n_views=2000, sphere_noise_mm=15.0))
    noisy = sphere_motion_report(
        [(R, -R @ c) for R, c in zip(truth.extrinsics.rotations, truth.view_centers)])
    pct = noisy.std_percent_of_radius
    noisy_ok = all(1.8 <= p <= 2.5 for p in pct)
    record(9, exact_ok and noisy_ok,
           f"exact: radius err {radius_err:.1e} mm, residual {exact.fit_rms_mm:.1e} mm; "
           f"sigma_t=15 mm: std/radius " + ", ".join(f"{p:.3f}%" for p in pct) + " (in [1.8, 2.5])")


def _eval_trial(seed, sigma=0.5, n_eval=20):
    obs, _ = generate(SimConfig(seed=seed, noise_px=sigma))
    held, _ = generate(SimConfig(seed=100000 + seed, noise_px=sigma, n_views=n_eval))
    est = SphericalCalibrator().fit(obs)
    return evaluate(est.intrinsics_, est.distortion_, held).rms_px


def test_criterion_10_held_out_evaluation():
    sigma = 0.5
    eps = np.array([_eval_trial(s, sigma) for s in range(TRIALS)])
    med = float(np.median(eps))
    dev = abs(med / sigma - 1.0)
    record(10, dev <= 0.15, f"median held-out error {med:.4f} px at sigma {sigma} px "
                            f"({100 * dev:.1f}% off, limit 15%); real-image tables not reproducible")
