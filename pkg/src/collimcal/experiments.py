"""Monte Carlo trials over simulated data (noise, view-count and sphere sweeps)."""

from __future__ import annotations

import numpy as np
from joblib import Parallel, delayed

from .bundle import BAOptions, bundle_adjust
from .closed_form import solve_closed_form
from .exceptions import CalibrationError
from .geometry import RadialDistortion
from .minimal import solve_minimal
from .simulate import SimConfig, generate

SWEEP_FIELDS = {"noise": "noise_px", "views": "n_views", "sphere-noise": "sphere_noise_mm"}


def calibration_errors(K, truth_K, t_cp=None, truth_t=None) -> dict:
    """Relative focal error (mean over fx, fy), principal point error in px and
    centre error in mm."""
    out = {
        "focal_rel": 0.5 * (abs(K.fx - truth_K.fx) / truth_K.fx + abs(K.fy - truth_K.fy) / truth_K.fy),
        "pp_px": float(np.hypot(K.cx - truth_K.cx, K.cy - truth_K.cy)),
    }
    if t_cp is not None:
        out["center_mm"] = float(np.linalg.norm(np.asarray(t_cp) - np.asarray(truth_t)))
    return out


def run_trial(config: SimConfig, stage: str = "ba", solver: str = "closedform") -> dict:
    """Simulate one data set and calibrate it.

    ``stage`` is ``init`` (solver output only) or ``ba``. Failures are
    reported as ``{"ok": False, "error": ...}`` rather than raised.
    """
    obs, truth = generate(config)
    try:
        if solver == "minimal":
            K, ext = solve_minimal(obs)
        else:
            K, ext = solve_closed_form(obs)
        dist = RadialDistortion()
        rms = None
        if stage == "ba":
            K, dist, ext, rep = bundle_adjust(K, dist, ext, obs, BAOptions())
            rms = rep.rms_px
    except CalibrationError as err:
        return {"ok": False, "error": f"{type(err).__name__}: {err}", "seed": config.seed}
    row = {"ok": True, "seed": config.seed, "rms_px": rms,
           "k1": dist.k1, "k2": dist.k2}
    row.update(calibration_errors(K, truth.intrinsics, ext.t_cp, truth.extrinsics.t_cp))
    return row


def run_trials(config: SimConfig, trials: int, stage: str = "ba", solver: str = "closedform",
               jobs: int = 1, seed0: int = 0) -> list:
    """``trials`` independent runs with seeds ``seed0 .. seed0 + trials - 1``."""
    configs = [config.with_(seed=seed0 + t) for t in range(trials)]
    if jobs == 1:
        return [run_trial(c, stage, solver) for c in configs]
    return Parallel(n_jobs=jobs)(delayed(run_trial)(c, stage, solver) for c in configs)


def median_of(rows, key: str) -> float:
    """Median of ``key`` over trials; failed trials count as infinitely bad."""
    vals = [r[key] if r["ok"] else np.inf for r in rows]
    return float(np.median(vals))


def sweep(config: SimConfig, param: str, values, trials: int, stage: str = "ba",
          solver: str = "closedform", jobs: int = 1, seed0: int = 0) -> list:
    """Median errors for each value of ``param`` (``noise``, ``views`` or
    ``sphere-noise``).

    The same seeds are used for every value, so neighbouring settings share
    poses and noise directions.
    """
    field = SWEEP_FIELDS[param]
    out = []
    for value in values:
        value = int(value) if field == "n_views" else float(value)
        rows = run_trials(config.with_(**{field: value}), trials, stage, solver, jobs, seed0)
        out.append({
            "param": param,
            "value": value,
            "trials": trials,
            "failures": sum(not r["ok"] for r in rows),
            "median_focal_rel": median_of(rows, "focal_rel"),
            "median_pp_px": median_of(rows, "pp_px"),
            "median_center_mm": median_of(rows, "center_mm"),
        })
    return out
